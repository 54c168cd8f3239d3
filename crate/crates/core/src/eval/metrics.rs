//! Threshold metrics over scored trials.

use crate::error::{Error, Result};

/// Default decision threshold for precision, recall and F-measure.
pub const DEFAULT_THETA: f64 = 0.5;
/// Target false-rejection rate for the usability-first operating point.
pub const TARGET_FRR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredTrial {
    pub score: f64,
    pub positive: bool,
}

impl ScoredTrial {
    pub fn new(score: f64, positive: bool) -> Self {
        Self { score, positive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Counts outcomes with `score >= theta` predicted positive.
pub fn confusion_metrics(trials: &[ScoredTrial], theta: f64) -> Confusion {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for t in trials {
        match (t.score >= theta, t.positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Confusion {
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f_measure: f_measure(precision, recall),
    }
}

/// Scores split by class, each sorted ascending.
struct Sorted {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl Sorted {
    fn new(trials: &[ScoredTrial]) -> Result<Self> {
        let mut pos: Vec<f64> = trials.iter().filter(|t| t.positive).map(|t| t.score).collect();
        let mut neg: Vec<f64> = trials.iter().filter(|t| !t.positive).map(|t| t.score).collect();
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::SingleClassTrials);
        }
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        Ok(Self { pos, neg })
    }

    /// Negatives with score ≥ θ over all negatives.
    fn far(&self, theta: f64) -> f64 {
        let below = self.neg.partition_point(|s| *s < theta);
        (self.neg.len() - below) as f64 / self.neg.len() as f64
    }

    /// Positives with score < θ over all positives.
    fn frr(&self, theta: f64) -> f64 {
        self.pos.partition_point(|s| *s < theta) as f64 / self.pos.len() as f64
    }
}

/// Candidate thresholds: 0, midpoints of consecutive distinct scores, and a
/// value just above 1.
pub fn eer_thresholds(trials: &[ScoredTrial]) -> Vec<f64> {
    let mut scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut out = Vec::with_capacity(scores.len() + 1);
    out.push(0.0f64.min(scores.first().copied().unwrap_or(0.0)));
    out.extend(scores.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(1.0f64.max(scores.last().copied().unwrap_or(1.0)) + f64::EPSILON);
    out
}

/// FAR and FRR at each candidate threshold.
pub fn error_curve(trials: &[ScoredTrial]) -> Result<Vec<(f64, f64, f64)>> {
    let sorted = Sorted::new(trials)?;
    Ok(eer_thresholds(trials)
        .into_iter()
        .map(|th| (th, sorted.far(th), sorted.frr(th)))
        .collect())
}

/// Equal error rate and its threshold, interpolated where FAR − FRR changes sign.
pub fn compute_eer(trials: &[ScoredTrial]) -> Result<(f64, f64)> {
    let curve = error_curve(trials)?;
    let k = curve
        .iter()
        .position(|(_, far, frr)| far - frr <= 0.0)
        .expect("FAR - FRR is negative at the top sentinel");
    let (th1, far1, frr1) = curve[k];
    if far1 == frr1 || k == 0 {
        return Ok((far1, th1));
    }
    let (th0, far0, frr0) = curve[k - 1];
    let d0 = far0 - frr0;
    let d1 = far1 - frr1;
    let t = d0 / (d0 - d1);
    Ok((far0 + t * (far1 - far0), th0 + t * (th1 - th0)))
}

/// Largest threshold whose FRR stays below [`TARGET_FRR`], and the FAR there.
pub fn optimize_threshold_min_frr(trials: &[ScoredTrial]) -> Result<(f64, f64)> {
    let sorted = Sorted::new(trials)?;
    let allowed = (sorted.pos.len() as f64 * TARGET_FRR).ceil() as usize;
    let fn_max = allowed.saturating_sub(1);
    let theta = sorted.pos[fn_max];
    Ok((theta, sorted.far(theta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub eer: f64,
    pub theta_eer: f64,
    pub far_at_min_frr: f64,
    pub theta_opt: f64,
    pub far_delta: f64,
}

impl MetricSet {
    pub fn compute(trials: &[ScoredTrial]) -> Result<Self> {
        let c = confusion_metrics(trials, DEFAULT_THETA);
        let (eer, theta_eer) = compute_eer(trials)?;
        let (theta_opt, far_opt) = optimize_threshold_min_frr(trials)?;
        Ok(Self {
            precision: c.precision,
            recall: c.recall,
            f_measure: c.f_measure,
            eer,
            theta_eer,
            far_at_min_frr: far_opt,
            theta_opt,
            far_delta: far_opt - eer,
        })
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.precision,
            self.recall,
            self.f_measure,
            self.eer,
            self.theta_eer,
            self.far_at_min_frr,
            self.theta_opt,
            self.far_delta,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            precision: a[0],
            recall: a[1],
            f_measure: a[2],
            eer: a[3],
            theta_eer: a[4],
            far_at_min_frr: a[5],
            theta_opt: a[6],
            far_delta: a[7],
        }
    }

    /// Field-wise arithmetic mean, summed in slice order.
    pub fn mean<'a>(sets: impl IntoIterator<Item = &'a MetricSet>) -> Option<Self> {
        let mut acc = [0.0; 8];
        let mut n = 0usize;
        for s in sets {
            for (a, v) in acc.iter_mut().zip(s.to_array()) {
                *a += v;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        Some(Self::from_array(acc.map(|v| v / n as f64)))
    }
}
