//! Tap windows anchored on NFC contact points and overlapping non-tap
//! windows cut from activity spans.
//!
//! All windows are half-open `[start, end)` in source time; a sample stamped
//! exactly at `end` belongs to the next window.

use crate::ingest::{ActivitySpan, NfcEvent};
use crate::types::{
    GestureWindow, QuaternionSample, SensorKind, SensorStream, SensorSubset, TriaxialSample,
    WindowLabel, WindowParams,
};

pub const ACTIVITY_WINDOW_MS: i64 = 4000;
pub const ACTIVITY_STRIDE_MS: i64 = 2000;

/// Minimum data quality for a window to be kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRule {
    /// Fraction of the expected `duration·rate` samples each required sensor must have.
    pub min_fraction: f64,
    /// Largest tolerated spacing between samples, including the window edges.
    pub max_gap_ms: i64,
}

impl Default for CoverageRule {
    fn default() -> Self {
        Self {
            min_fraction: 0.9,
            max_gap_ms: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    TooFewSamples {
        sensor: SensorKind,
        got: usize,
        expected: usize,
    },
    Gap {
        sensor: SensorKind,
        gap_ms: i64,
    },
}

fn range_of<T>(samples: &[T], t: impl Fn(&T) -> i64, start: i64, end: i64) -> std::ops::Range<usize> {
    let lo = samples.partition_point(|s| t(s) < start);
    let hi = samples.partition_point(|s| t(s) < end);
    lo..hi.max(lo)
}

fn slice_triaxial(samples: &[TriaxialSample], start: i64, end: i64) -> Vec<TriaxialSample> {
    samples[range_of(samples, |s| s.t_ms, start, end)]
        .iter()
        .map(|s| TriaxialSample {
            t_ms: s.t_ms - start,
            ..*s
        })
        .collect()
}

fn slice_quaternion(samples: &[QuaternionSample], start: i64, end: i64) -> Vec<QuaternionSample> {
    samples[range_of(samples, |s| s.t_ms, start, end)]
        .iter()
        .map(|s| QuaternionSample {
            t_ms: s.t_ms - start,
            ..*s
        })
        .collect()
}

/// Checks one sensor's window-relative timestamps against the rule.
fn check_coverage(
    sensor: SensorKind,
    ts: &[i64],
    duration_ms: i64,
    rate_hz: f64,
    rule: &CoverageRule,
) -> Result<(), Exclusion> {
    let exact = duration_ms as f64 * rate_hz / 1000.0;
    let expected = exact.round() as usize;
    // a uniform grid always yields at least floor(exact) samples
    let needed = ((exact * rule.min_fraction - 1e-9).ceil()).min((exact + 1e-9).floor()) as usize;
    if ts.len() < needed || ts.is_empty() {
        return Err(Exclusion::TooFewSamples {
            sensor,
            got: ts.len(),
            expected,
        });
    }
    let mut worst = ts[0].max(duration_ms - ts[ts.len() - 1]);
    for pair in ts.windows(2) {
        worst = worst.max(pair[1] - pair[0]);
    }
    if worst > rule.max_gap_ms {
        return Err(Exclusion::Gap {
            sensor,
            gap_ms: worst,
        });
    }
    Ok(())
}

/// Cuts `[start, start + duration_ms)` from a stream with window-relative timestamps.
pub fn extract_window(
    stream: &SensorStream,
    start: i64,
    duration_ms: i64,
    label: WindowLabel,
    required: SensorSubset,
    rule: &CoverageRule,
) -> Result<GestureWindow, Exclusion> {
    let end = start + duration_ms;
    let window = GestureWindow {
        label,
        source_start_ms: start,
        duration_ms,
        acc: slice_triaxial(stream.acc(), start, end),
        gyr: slice_triaxial(stream.gyr(), start, end),
        lac: slice_triaxial(stream.lac(), start, end),
        grv: slice_quaternion(stream.grv(), start, end),
    };
    for sensor in required.iter() {
        let ts: Vec<i64> = match sensor {
            SensorKind::RotationVector => window.grv.iter().map(|s| s.t_ms).collect(),
            k => window.triaxial(k).iter().map(|s| s.t_ms).collect(),
        };
        check_coverage(sensor, &ts, duration_ms, stream.nominal_rate_hz(), rule)?;
    }
    Ok(window)
}

/// Cuts the tap window `[T0 − o − s, T0 − o)` for one contact event.
pub fn extract_tap_window(
    stream: &SensorStream,
    event: &NfcEvent,
    params: WindowParams,
    required: SensorSubset,
    rule: &CoverageRule,
) -> Result<GestureWindow, Exclusion> {
    let (start, _) = params.span_for(event.t0_ms);
    let label = WindowLabel::Tap {
        user_id: event.user_id.clone(),
        session_id: event.session_id.clone(),
        terminal: event.terminal,
    };
    extract_window(stream, start, params.size_ms(), label, required, rule)
}

#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub windows: Vec<GestureWindow>,
    pub excluded: usize,
}

/// Cuts `size_ms` windows every `stride_ms` from the start of an activity span
/// while the window fits inside it.
pub fn segment_activity_windows(
    stream: &SensorStream,
    span: &ActivitySpan,
    size_ms: i64,
    stride_ms: i64,
    required: SensorSubset,
    rule: &CoverageRule,
) -> Segmentation {
    assert!(size_ms > 0 && stride_ms > 0 && stride_ms <= size_ms, "bad segmentation grid");
    let mut out = Segmentation::default();
    let mut start = span.start_ms;
    while start + size_ms <= span.end_ms {
        let label = WindowLabel::NonTap {
            user_id: span.user_id.clone(),
            activity: span.activity,
        };
        match extract_window(stream, start, size_ms, label, required, rule) {
            Ok(w) => out.windows.push(w),
            Err(_) => out.excluded += 1,
        }
        start += stride_ms;
    }
    out
}

/// Keeps the trailing `size_ms` of a window, re-timestamped to its new start.
pub fn truncate_trailing(window: &GestureWindow, size_ms: i64) -> GestureWindow {
    if size_ms >= window.duration_ms {
        return window.clone();
    }
    let start = window.duration_ms - size_ms;
    let end = window.duration_ms;
    GestureWindow {
        label: window.label.clone(),
        source_start_ms: window.source_start_ms + start,
        duration_ms: size_ms,
        acc: slice_triaxial(&window.acc, start, end),
        gyr: slice_triaxial(&window.gyr, start, end),
        lac: slice_triaxial(&window.lac, start, end),
        grv: slice_quaternion(&window.grv, start, end),
    }
}
