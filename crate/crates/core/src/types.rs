//! Sensor samples, streams, labels and window parameterization.
//!
//! Timestamps are integer milliseconds since the stream epoch. They are only
//! converted to seconds inside the numeric routines.
//!
//! Units follow the device: accelerometer and linear accelerometer in m/s²,
//! gyroscope in deg/s. Rotation vectors are unit quaternions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Envelope of collected data around an NFC contact point, in milliseconds.
pub const PRE_CONTACT_MS: i64 = 4000;
pub const POST_CONTACT_MS: i64 = 2000;

/// Euclidean magnitude of a triple.
#[inline]
pub fn energy(x: f64, y: f64, z: f64) -> f64 {
    (x * x + y * y + z * z).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriaxialSample {
    pub t_ms: i64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TriaxialSample {
    pub fn new(t_ms: i64, x: f64, y: f64, z: f64) -> Result<Self> {
        if t_ms < 0 {
            return Err(Error::InvalidSample(format!("negative timestamp {t_ms}")));
        }
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite value at t={t_ms}")));
        }
        Ok(Self { t_ms, x, y, z })
    }

    pub fn energy(&self) -> f64 {
        energy(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionSample {
    pub t_ms: i64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl QuaternionSample {
    pub fn new(t_ms: i64, x: f64, y: f64, z: f64, w: f64) -> Result<Self> {
        if t_ms < 0 {
            return Err(Error::InvalidSample(format!("negative timestamp {t_ms}")));
        }
        if ![x, y, z, w].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite value at t={t_ms}")));
        }
        Ok(Self { t_ms, x, y, z, w })
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    /// Scales the quaternion to unit norm, preserving direction.
    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n <= 1e-12 || !n.is_finite() {
            return Err(Error::ZeroNormQuaternion);
        }
        Ok(Self {
            t_ms: self.t_ms,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
            w: self.w / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorKind {
    Accelerometer,
    Gyroscope,
    LinearAccelerometer,
    RotationVector,
}

impl SensorKind {
    pub const ALL: [SensorKind; 4] = [
        SensorKind::Accelerometer,
        SensorKind::Gyroscope,
        SensorKind::LinearAccelerometer,
        SensorKind::RotationVector,
    ];

    /// Short code used in files and feature names.
    pub fn code(self) -> &'static str {
        match self {
            SensorKind::Accelerometer => "Acc",
            SensorKind::Gyroscope => "Gyr",
            SensorKind::LinearAccelerometer => "LAc",
            SensorKind::RotationVector => "GRV",
        }
    }

    pub fn is_triaxial(self) -> bool {
        self != SensorKind::RotationVector
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "Acc" => Ok(SensorKind::Accelerometer),
            "Gyr" => Ok(SensorKind::Gyroscope),
            "LAc" => Ok(SensorKind::LinearAccelerometer),
            "GRV" => Ok(SensorKind::RotationVector),
            other => Err(format!("unknown sensor '{other}'")),
        }
    }
}

/// Non-empty set of sensors, iterated in the canonical Acc, Gyr, LAc, GRV order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorSubset(u8);

impl SensorSubset {
    pub const FULL: SensorSubset = SensorSubset(0b1111);

    pub fn new(kinds: &[SensorKind]) -> Result<Self> {
        let bits = kinds.iter().fold(0u8, |acc, k| acc | k.bit());
        if bits == 0 {
            return Err(Error::InvalidConfig("sensor subset must not be empty".into()));
        }
        Ok(SensorSubset(bits))
    }

    pub fn contains(&self, kind: SensorKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = SensorKind> + '_ {
        SensorKind::ALL.into_iter().filter(|k| self.contains(*k))
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for SensorSubset {
    fn default() -> Self {
        SensorSubset::FULL
    }
}

impl fmt::Display for SensorSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<&str> = self.iter().map(|k| k.code()).collect();
        f.write_str(&codes.join(","))
    }
}

impl FromStr for SensorSubset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let kinds = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(SensorKind::from_str)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        SensorSubset::new(&kinds).map_err(|e| e.to_string())
    }
}

/// One of the six fixed terminals or the freestyle handheld terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Terminal {
    Fixed(u8),
    Freestyle,
}

impl Terminal {
    pub const FIXED: [Terminal; 6] = [
        Terminal::Fixed(1),
        Terminal::Fixed(2),
        Terminal::Fixed(3),
        Terminal::Fixed(4),
        Terminal::Fixed(5),
        Terminal::Fixed(6),
    ];

    pub const ALL: [Terminal; 7] = [
        Terminal::Fixed(1),
        Terminal::Fixed(2),
        Terminal::Fixed(3),
        Terminal::Fixed(4),
        Terminal::Fixed(5),
        Terminal::Fixed(6),
        Terminal::Freestyle,
    ];

    pub fn is_fixed(self) -> bool {
        matches!(self, Terminal::Fixed(_))
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Fixed(n) => write!(f, "{n}"),
            Terminal::Freestyle => f.write_str("F"),
        }
    }
}

impl FromStr for Terminal {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "F" => Ok(Terminal::Freestyle),
            t => match t.parse::<u8>() {
                Ok(n @ 1..=6) => Ok(Terminal::Fixed(n)),
                _ => Err(format!("unknown terminal '{t}' (expected 1-6 or F)")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activity {
    Walking,
    BusOrTrain,
    InStore,
    Combined,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::Walking,
        Activity::BusOrTrain,
        Activity::InStore,
        Activity::Combined,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Activity::Walking => "walking",
            Activity::BusOrTrain => "bus_or_train",
            Activity::InStore => "in_store",
            Activity::Combined => "combined",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Activity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Activity::ALL
            .into_iter()
            .find(|a| a.code() == s.trim())
            .ok_or_else(|| format!("unknown activity '{}'", s.trim()))
    }
}

/// Time-ordered samples of all four sensors for one user-session.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream {
    user_id: String,
    session_id: String,
    nominal_rate_hz: f64,
    acc: Vec<TriaxialSample>,
    gyr: Vec<TriaxialSample>,
    lac: Vec<TriaxialSample>,
    grv: Vec<QuaternionSample>,
}

/// Samples in reception order, before sorting and de-duplication.
#[derive(Debug, Clone, Default)]
pub struct RawSamples {
    pub acc: Vec<TriaxialSample>,
    pub gyr: Vec<TriaxialSample>,
    pub lac: Vec<TriaxialSample>,
    pub grv: Vec<QuaternionSample>,
}

impl RawSamples {
    pub fn triaxial_mut(&mut self, kind: SensorKind) -> &mut Vec<TriaxialSample> {
        match kind {
            SensorKind::Accelerometer => &mut self.acc,
            SensorKind::Gyroscope => &mut self.gyr,
            SensorKind::LinearAccelerometer => &mut self.lac,
            SensorKind::RotationVector => panic!("GRV is not triaxial"),
        }
    }
}

/// Stable sort by timestamp, keeping the last-received sample of each timestamp.
fn sort_dedup<T: Copy>(mut v: Vec<T>, t: impl Fn(&T) -> i64) -> (Vec<T>, usize) {
    v.sort_by_key(|s| t(s));
    let before = v.len();
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for s in v {
        match out.last_mut() {
            Some(last) if t(last) == t(&s) => *last = s,
            _ => out.push(s),
        }
    }
    let dups = before - out.len();
    (out, dups)
}

impl SensorStream {
    /// Builds a stream from samples in any order. Returns the stream and the
    /// number of duplicate-timestamp samples that were dropped.
    pub fn from_raw(
        user_id: impl Into<String>,
        session_id: impl Into<String>,
        nominal_rate_hz: f64,
        raw: RawSamples,
    ) -> Result<(Self, usize)> {
        if !(nominal_rate_hz > 0.0 && nominal_rate_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "nominal rate must be positive, got {nominal_rate_hz}"
            )));
        }
        let (acc, d0) = sort_dedup(raw.acc, |s| s.t_ms);
        let (gyr, d1) = sort_dedup(raw.gyr, |s| s.t_ms);
        let (lac, d2) = sort_dedup(raw.lac, |s| s.t_ms);
        let (grv, d3) = sort_dedup(raw.grv, |s| s.t_ms);
        Ok((
            Self {
                user_id: user_id.into(),
                session_id: session_id.into(),
                nominal_rate_hz,
                acc,
                gyr,
                lac,
                grv,
            },
            d0 + d1 + d2 + d3,
        ))
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    pub fn acc(&self) -> &[TriaxialSample] {
        &self.acc
    }

    pub fn gyr(&self) -> &[TriaxialSample] {
        &self.gyr
    }

    pub fn lac(&self) -> &[TriaxialSample] {
        &self.lac
    }

    pub fn grv(&self) -> &[QuaternionSample] {
        &self.grv
    }

    pub fn triaxial(&self, kind: SensorKind) -> &[TriaxialSample] {
        match kind {
            SensorKind::Accelerometer => &self.acc,
            SensorKind::Gyroscope => &self.gyr,
            SensorKind::LinearAccelerometer => &self.lac,
            SensorKind::RotationVector => &[],
        }
    }

    /// Sorted timestamps of one sensor.
    pub fn timestamps(&self, kind: SensorKind) -> Vec<i64> {
        match kind {
            SensorKind::RotationVector => self.grv.iter().map(|s| s.t_ms).collect(),
            k => self.triaxial(k).iter().map(|s| s.t_ms).collect(),
        }
    }

    pub fn sample_count(&self, kind: SensorKind) -> usize {
        match kind {
            SensorKind::RotationVector => self.grv.len(),
            k => self.triaxial(k).len(),
        }
    }

    /// Earliest and latest timestamp over all sensors.
    pub fn extent(&self) -> Option<(i64, i64)> {
        let firsts = [
            self.acc.first().map(|s| s.t_ms),
            self.gyr.first().map(|s| s.t_ms),
            self.lac.first().map(|s| s.t_ms),
            self.grv.first().map(|s| s.t_ms),
        ];
        let lasts = [
            self.acc.last().map(|s| s.t_ms),
            self.gyr.last().map(|s| s.t_ms),
            self.lac.last().map(|s| s.t_ms),
            self.grv.last().map(|s| s.t_ms),
        ];
        let lo = firsts.iter().flatten().min()?;
        let hi = lasts.iter().flatten().max()?;
        Some((*lo, *hi))
    }
}

/// Window size `s` and offset `o`, in seconds at the interface and stored as
/// whole milliseconds.
///
/// The window ends `o` seconds before the contact point and spans `s`
/// seconds. Feasible parameters satisfy `s > 0`, `o >= -2`, `s + o <= 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowParams {
    size_ms: i64,
    offset_ms: i64,
}

impl WindowParams {
    pub fn new(size_s: f64, offset_s: f64) -> Result<Self> {
        let bad = || Error::InvalidWindowParams { size_s, offset_s };
        if !(size_s.is_finite() && offset_s.is_finite()) {
            return Err(bad());
        }
        let size_ms = (size_s * 1000.0).round() as i64;
        let offset_ms = (offset_s * 1000.0).round() as i64;
        Self::from_ms(size_ms, offset_ms).map_err(|_| bad())
    }

    pub fn from_ms(size_ms: i64, offset_ms: i64) -> Result<Self> {
        if size_ms <= 0 || offset_ms < -POST_CONTACT_MS || size_ms + offset_ms > PRE_CONTACT_MS {
            return Err(Error::InvalidWindowParams {
                size_s: size_ms as f64 / 1000.0,
                offset_s: offset_ms as f64 / 1000.0,
            });
        }
        Ok(Self { size_ms, offset_ms })
    }

    pub fn size_ms(&self) -> i64 {
        self.size_ms
    }

    pub fn offset_ms(&self) -> i64 {
        self.offset_ms
    }

    pub fn size_s(&self) -> f64 {
        self.size_ms as f64 / 1000.0
    }

    pub fn offset_s(&self) -> f64 {
        self.offset_ms as f64 / 1000.0
    }

    /// `[T_S, T_E)` in source time for contact point `t0_ms`.
    pub fn span_for(&self, t0_ms: i64) -> (i64, i64) {
        let end = t0_ms - self.offset_ms;
        (end - self.size_ms, end)
    }
}

impl fmt::Display for WindowParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={}, o={}", self.size_s(), self.offset_s())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WindowLabel {
    Tap {
        user_id: String,
        session_id: String,
        terminal: Terminal,
    },
    NonTap {
        user_id: String,
        activity: Activity,
    },
}

impl WindowLabel {
    pub fn user_id(&self) -> &str {
        match self {
            WindowLabel::Tap { user_id, .. } | WindowLabel::NonTap { user_id, .. } => user_id,
        }
    }

    pub fn is_tap(&self) -> bool {
        matches!(self, WindowLabel::Tap { .. })
    }
}

/// Fixed-duration slice of a stream, re-timestamped relative to its start.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureWindow {
    pub label: WindowLabel,
    /// Window start in source time.
    pub source_start_ms: i64,
    pub duration_ms: i64,
    pub acc: Vec<TriaxialSample>,
    pub gyr: Vec<TriaxialSample>,
    pub lac: Vec<TriaxialSample>,
    pub grv: Vec<QuaternionSample>,
}

impl GestureWindow {
    pub fn triaxial(&self, kind: SensorKind) -> &[TriaxialSample] {
        match kind {
            SensorKind::Accelerometer => &self.acc,
            SensorKind::Gyroscope => &self.gyr,
            SensorKind::LinearAccelerometer => &self.lac,
            SensorKind::RotationVector => &[],
        }
    }

    pub fn sample_count(&self, kind: SensorKind) -> usize {
        match kind {
            SensorKind::RotationVector => self.grv.len(),
            k => self.triaxial(k).len(),
        }
    }

    pub fn source_end_ms(&self) -> i64 {
        self.source_start_ms + self.duration_ms
    }
}
