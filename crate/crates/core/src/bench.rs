//! Single-gesture classification latency.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::features::Featurizer;
use crate::forest::ForestModel;
use crate::types::GestureWindow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyReport {
    pub repetitions: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    /// Score of the last repetition, kept so the work is not optimized away.
    pub score: f64,
}

/// Times featurize + score of `window` over `repetitions` runs.
pub fn measure_latency(
    featurizer: &Featurizer,
    model: &ForestModel,
    window: &GestureWindow,
    repetitions: usize,
) -> Result<LatencyReport> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions: must be positive".into()));
    }
    let mut times = Vec::with_capacity(repetitions);
    let mut score = 0.0;
    for _ in 0..repetitions {
        let start = Instant::now();
        let values = featurizer.values(std::hint::black_box(window))?;
        score = model.score(&values)?;
        times.push(start.elapsed().as_secs_f64() * 1000.0);
    }
    let mean_ms = times.iter().sum::<f64>() / repetitions as f64;
    times.sort_by(f64::total_cmp);
    let at = |p: f64| times[((repetitions - 1) as f64 * p).round() as usize];
    Ok(LatencyReport {
        repetitions,
        median_ms: at(0.5),
        p95_ms: at(0.95),
        mean_ms,
        score,
    })
}
