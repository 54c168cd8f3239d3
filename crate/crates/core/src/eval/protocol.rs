//! Grid sweeps of the authentication and intent protocols.
//!
//! A run prepares featurized windows per grid cell, enumerates splits, then
//! trains one forest per (split group, seed) work item in parallel. Results
//! are collected in work-item order, so reports do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::metrics::{MetricSet, ScoredTrial};
use crate::eval::split::{self, Split, DEFAULT_FOLDS};
use crate::features::{FeatureConfig, FeatureSchema, Featurizer};
use crate::forest::{train_forest, ForestConfig, ForestModel, TrainingSet};
use crate::ingest::Dataset;
use crate::types::{Activity, SensorSubset, Terminal, WindowLabel, WindowParams};
use crate::window::{
    extract_tap_window, extract_window, segment_activity_windows, CoverageRule, ACTIVITY_STRIDE_MS, ACTIVITY_WINDOW_MS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    AuthTerminalAgnostic,
    AuthTerminalSpecific,
    IntentUserAgnostic,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [
        ProtocolKind::AuthTerminalAgnostic,
        ProtocolKind::AuthTerminalSpecific,
        ProtocolKind::IntentUserAgnostic,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ProtocolKind::AuthTerminalAgnostic => "auth_terminal_agnostic",
            ProtocolKind::AuthTerminalSpecific => "auth_terminal_specific",
            ProtocolKind::IntentUserAgnostic => "intent_user_agnostic",
        }
    }

    pub fn is_auth(self) -> bool {
        !matches!(self, ProtocolKind::IntentUserAgnostic)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown protocol '{s}'")))
    }
}

/// Sizes 0.5..=4.0 s and offsets −2..=2 s in 0.5 s steps with s + o ≤ 4.
pub fn default_grid() -> Vec<WindowParams> {
    let mut grid = Vec::new();
    for s in (500..=4000).step_by(500) {
        for o in (-2000..=2000).step_by(500) {
            if let Ok(p) = WindowParams::from_ms(s, o) {
                grid.push(p);
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub grid: Vec<WindowParams>,
    pub subset: SensorSubset,
    pub seeds: Vec<u64>,
    pub enrollment_size: Option<usize>,
    pub forest: ForestConfig,
    pub features: FeatureConfig,
    pub coverage: CoverageRule,
    pub fold_count: usize,
    pub top_k: usize,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            grid: default_grid(),
            subset: SensorSubset::FULL,
            seeds: (0..10).collect(),
            enrollment_size: None,
            forest: ForestConfig::default(),
            features: FeatureConfig::default(),
            coverage: CoverageRule::default(),
            fold_count: DEFAULT_FOLDS,
            top_k: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds: at least one seed is required".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds: values must be distinct".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid: no feasible window parameters".into()));
        }
        if self.enrollment_size.is_some() && !self.kind.is_auth() {
            return Err(Error::InvalidConfig(
                "enrollment_size: only applies to authentication protocols".into(),
            ));
        }
        if self.enrollment_size == Some(0) {
            return Err(Error::InvalidConfig("enrollment_size: must be positive".into()));
        }
        if self.fold_count == 0 {
            return Err(Error::InvalidConfig("fold_count: must be positive".into()));
        }
        if !self.kind.is_auth() {
            if let Some(p) = self.grid.iter().find(|p| p.size_ms() > ACTIVITY_WINDOW_MS) {
                return Err(Error::InvalidConfig(format!(
                    "grid: window size {} s exceeds the {} s non-tap window",
                    p.size_s(),
                    ACTIVITY_WINDOW_MS / 1000
                )));
            }
        }
        self.features.alpha()?;
        Ok(())
    }
}

/// Featurized windows for one grid cell, in dataset order: taps by
/// (user, session, t0), then non-taps by (user, span start, window start).
#[derive(Debug, Clone)]
pub struct CellData {
    pub params: WindowParams,
    pub schema: FeatureSchema,
    pub labels: Vec<WindowLabel>,
    features: Vec<f64>,
    pub excluded_taps: usize,
    pub excluded_nontaps: usize,
}

impl CellData {
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.schema.len();
        &self.features[i * p..(i + 1) * p]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A 4 s non-tap window that passed coverage, located by its source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonTapSlot {
    pub span_index: usize,
    pub start_ms: i64,
}

/// Segments every activity span at 4 s / 2 s; returns kept slots and the
/// number excluded for coverage or a missing stream.
pub fn nontap_slots(dataset: &Dataset, required: SensorSubset, rule: &CoverageRule) -> (Vec<NonTapSlot>, usize) {
    let per_span: Vec<(Vec<NonTapSlot>, usize)> = dataset
        .activity_spans
        .par_iter()
        .enumerate()
        .map(|(k, span)| match dataset.stream_for_span(span) {
            None => (Vec::new(), (span.duration_ms() >= ACTIVITY_WINDOW_MS) as usize),
            Some(stream) => {
                let seg = segment_activity_windows(stream, span, ACTIVITY_WINDOW_MS, ACTIVITY_STRIDE_MS, required, rule);
                let slots = seg
                    .windows
                    .iter()
                    .map(|w| NonTapSlot {
                        span_index: k,
                        start_ms: w.source_start_ms,
                    })
                    .collect();
                (slots, seg.excluded)
            }
        })
        .collect();
    let excluded = per_span.iter().map(|p| p.1).sum();
    (per_span.into_iter().flat_map(|p| p.0).collect(), excluded)
}

/// Cuts and featurizes all windows of one grid cell. Non-tap windows keep
/// the trailing `s` seconds of each 4 s slot.
pub fn prepare_cell(
    dataset: &Dataset,
    params: WindowParams,
    featurizer: &Featurizer,
    rule: &CoverageRule,
    nontaps: Option<&[NonTapSlot]>,
) -> Result<CellData> {
    let subset = featurizer.subset();
    let taps: Vec<Option<(WindowLabel, Vec<f64>)>> = dataset
        .nfc_events
        .par_iter()
        .map(|e| {
            let stream = dataset
                .stream(&e.user_id, &e.session_id)
                .ok_or_else(|| Error::DanglingReference(format!("{}/{}", e.user_id, e.session_id)))?;
            match extract_tap_window(stream, e, params, subset, rule) {
                Ok(w) => Ok(Some((w.label.clone(), featurizer.values(&w)?))),
                Err(_) => Ok(None),
            }
        })
        .collect::<Result<_>>()?;
    let others: Vec<Option<(WindowLabel, Vec<f64>)>> = match nontaps {
        None => Vec::new(),
        Some(slots) => slots
            .par_iter()
            .map(|slot| {
                let span = &dataset.activity_spans[slot.span_index];
                let stream = dataset
                    .stream_for_span(span)
                    .ok_or_else(|| Error::DanglingReference(format!("activity span of {}", span.user_id)))?;
                let size = params.size_ms().min(ACTIVITY_WINDOW_MS);
                let start = slot.start_ms + ACTIVITY_WINDOW_MS - size;
                let label = WindowLabel::NonTap {
                    user_id: span.user_id.clone(),
                    activity: span.activity,
                };
                match extract_window(stream, start, size, label, subset, rule) {
                    Ok(w) => Ok(Some((w.label.clone(), featurizer.values(&w)?))),
                    Err(_) => Ok(None),
                }
            })
            .collect::<Result<_>>()?,
    };
    let excluded_taps = taps.iter().filter(|t| t.is_none()).count();
    let excluded_nontaps = others.iter().filter(|t| t.is_none()).count();
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for (label, values) in taps.into_iter().chain(others).flatten() {
        labels.push(label);
        features.extend(values);
    }
    Ok(CellData {
        params,
        schema: featurizer.schema().clone(),
        labels,
        features,
        excluded_taps,
        excluded_nontaps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub seed: u64,
    pub split_id: String,
    pub metrics: MetricSet,
}

/// Negative trial scored against the EER threshold of its split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityTrial {
    pub activity: Activity,
    pub score: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityFar {
    pub trials: usize,
    pub false_accepts: usize,
    pub far: f64,
    /// Share of all negative trials, `combined` included.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityFarTable {
    /// Walking, bus/train and in-store, in that order.
    pub rows: Vec<(Activity, ActivityFar)>,
    pub combined: ActivityFar,
    pub all: ActivityFar,
}

/// FAR at each trial's threshold, grouped by activity; `combined` is kept out
/// of the per-activity rows but counted in `all`.
pub fn far_by_activity(trials: &[ActivityTrial]) -> ActivityFarTable {
    let total = trials.len();
    let group = |pred: &dyn Fn(Activity) -> bool| {
        let (mut n, mut fa) = (0, 0);
        for t in trials.iter().filter(|t| pred(t.activity)) {
            n += 1;
            if t.score >= t.theta {
                fa += 1;
            }
        }
        ActivityFar {
            trials: n,
            false_accepts: fa,
            far: if n == 0 { 0.0 } else { fa as f64 / n as f64 },
            proportion: if total == 0 { 0.0 } else { n as f64 / total as f64 },
        }
    };
    ActivityFarTable {
        rows: [Activity::Walking, Activity::BusOrTrain, Activity::InStore]
            .into_iter()
            .map(|a| (a, group(&|x| x == a)))
            .collect(),
        combined: group(&|x| x == Activity::Combined),
        all: group(&|_| true),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub params: WindowParams,
    pub rows: Vec<TrialRow>,
    pub mean: MetricSet,
    /// Features by the number of models that ranked them in their top k.
    pub top_features: Vec<(String, usize)>,
    pub windows: usize,
    pub excluded_windows: usize,
    pub activity_far: Option<ActivityFarTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub kind: ProtocolKind,
    pub subset: SensorSubset,
    pub cells: Vec<CellReport>,
}

impl EvaluationReport {
    /// Cell with the highest mean F-measure, ties to the lower EER then grid order.
    pub fn best_cell(&self) -> Option<&CellReport> {
        self.cells.iter().reduce(|best, c| {
            let better = c.mean.f_measure > best.mean.f_measure
                || (c.mean.f_measure == best.mean.f_measure && c.mean.eer < best.mean.eer);
            if better {
                c
            } else {
                best
            }
        })
    }
}

/// Splits sharing one training side: one forest per seed scores all tests.
struct SplitGroup {
    train: Vec<(usize, bool)>,
    tests: Vec<(String, Vec<(usize, bool)>)>,
}

fn split_groups(cell: &CellData, spec: &ProtocolSpec, users: &[String]) -> Result<Vec<SplitGroup>> {
    let mut groups = Vec::new();
    let single = |s: Split| SplitGroup {
        train: s.train,
        tests: vec![(s.id, s.test)],
    };
    for user in users {
        match spec.kind {
            ProtocolKind::AuthTerminalAgnostic => {
                for t in Terminal::FIXED {
                    let mut s = split::split_auth_terminal_agnostic(&cell.labels, user, t)?;
                    if let Some(k) = spec.enrollment_size {
                        s = split::subsample_enrollment(&cell.labels, &s, k)?;
                    }
                    groups.push(single(s));
                }
            }
            ProtocolKind::AuthTerminalSpecific => {
                for t in Terminal::ALL {
                    let mut s = split::split_auth_terminal_specific(&cell.labels, user, t)?;
                    if let Some(k) = spec.enrollment_size {
                        s = split::subsample_enrollment(&cell.labels, &s, k)?;
                    }
                    groups.push(single(s));
                }
            }
            ProtocolKind::IntentUserAgnostic => {
                let folds = split::split_intent_user_agnostic(&cell.labels, user, spec.fold_count)?;
                let train = folds[0].train.clone();
                groups.push(SplitGroup {
                    train,
                    tests: folds.into_iter().map(|s| (s.id, s.test)).collect(),
                });
            }
        }
    }
    Ok(groups)
}

struct UnitResult {
    rows: Vec<TrialRow>,
    top: Vec<String>,
    activity: Vec<ActivityTrial>,
}

fn run_unit(cell: &CellData, spec: &ProtocolSpec, group: &SplitGroup, seed: u64) -> Result<UnitResult> {
    let mut set = TrainingSet::new(cell.schema.len());
    for &(i, p) in &group.train {
        set.push(cell.row(i), p)?;
    }
    let model = train_forest(&set, &cell.schema, &spec.forest, seed)?;
    let mut rows = Vec::with_capacity(group.tests.len());
    let mut activity = Vec::new();
    for (id, test) in &group.tests {
        let trials = score_side(&model, cell, test)?;
        let metrics = MetricSet::compute(&trials).map_err(|e| match e {
            Error::SingleClassTrials => Error::EmptySplit(format!("{id}: test side lacks a class")),
            e => e,
        })?;
        for (&(i, p), t) in test.iter().zip(&trials) {
            if let (false, WindowLabel::NonTap { activity: a, .. }) = (p, &cell.labels[i]) {
                activity.push(ActivityTrial {
                    activity: *a,
                    score: t.score,
                    theta: metrics.theta_eer,
                });
            }
        }
        rows.push(TrialRow {
            seed,
            split_id: id.clone(),
            metrics,
        });
    }
    Ok(UnitResult {
        rows,
        top: model.top_features(spec.top_k).into_iter().map(|(n, _)| n).collect(),
        activity,
    })
}

fn score_side(model: &ForestModel, cell: &CellData, side: &[(usize, bool)]) -> Result<Vec<ScoredTrial>> {
    side.iter()
        .map(|&(i, p)| Ok(ScoredTrial::new(model.score(cell.row(i))?, p)))
        .collect()
}

/// Runs the splits and seeds of one prepared cell.
pub fn evaluate_cell(cell: &CellData, spec: &ProtocolSpec, users: &[String]) -> Result<CellReport> {
    let groups = split_groups(cell, spec, users)?;
    let units: Vec<(usize, u64)> = (0..groups.len())
        .flat_map(|g| spec.seeds.iter().map(move |&s| (g, s)))
        .collect();
    let results: Vec<UnitResult> = units
        .par_iter()
        .map(|&(g, seed)| run_unit(cell, spec, &groups[g], seed))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut activity = Vec::new();
    for r in results {
        rows.extend(r.rows);
        for name in &r.top {
            if let Some(i) = cell.schema.index_of(name) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        activity.extend(r.activity);
    }
    let mut top: Vec<(usize, usize)> = counts.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mean = MetricSet::mean(rows.iter().map(|r| &r.metrics))
        .ok_or_else(|| Error::EmptySplit(format!("cell {}: no splits", cell.params)))?;
    Ok(CellReport {
        params: cell.params,
        mean,
        rows,
        top_features: top
            .into_iter()
            .map(|(i, c)| (cell.schema.names()[i].clone(), c))
            .collect(),
        windows: cell.len(),
        excluded_windows: cell.excluded_taps + cell.excluded_nontaps,
        activity_far: (!spec.kind.is_auth()).then(|| far_by_activity(&activity)),
    })
}

/// Featurize, train, score and summarize every grid cell of `spec`.
pub fn run_protocol(dataset: &Dataset, spec: &ProtocolSpec) -> Result<EvaluationReport> {
    spec.validate()?;
    let featurizer = Featurizer::new(spec.subset, spec.features.at_rate(dataset.nominal_rate_hz))?;
    let users = dataset.users();
    let slots = (!spec.kind.is_auth()).then(|| nontap_slots(dataset, spec.subset, &spec.coverage));
    let mut cells = Vec::with_capacity(spec.grid.len());
    for &params in &spec.grid {
        let mut cell = prepare_cell(
            dataset,
            params,
            &featurizer,
            &spec.coverage,
            slots.as_ref().map(|s| s.0.as_slice()),
        )?;
        if let Some((_, excluded)) = &slots {
            cell.excluded_nontaps += excluded;
        }
        log::info!(
            "{} {}: {} windows, {} excluded",
            spec.kind,
            params,
            cell.len(),
            cell.excluded_taps + cell.excluded_nontaps
        );
        cells.push(evaluate_cell(&cell, spec, &users)?);
    }
    Ok(EvaluationReport {
        kind: spec.kind,
        subset: spec.subset,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrollmentPoint {
    /// `None` is the full positive training set.
    pub size: Option<usize>,
    pub eer: f64,
    pub metrics: MetricSet,
}

/// Terminal-agnostic authentication EER at each enrollment size, on the first
/// grid cell of `spec`.
pub fn enrollment_sweep(dataset: &Dataset, spec: &ProtocolSpec, sizes: &[Option<usize>]) -> Result<Vec<EnrollmentPoint>> {
    let params = *spec
        .grid
        .first()
        .ok_or_else(|| Error::InvalidConfig("grid: no feasible window parameters".into()))?;
    let mut base = spec.clone();
    base.kind = ProtocolKind::AuthTerminalAgnostic;
    base.grid = vec![params];
    base.enrollment_size = None;
    base.validate()?;
    let featurizer = Featurizer::new(base.subset, base.features.at_rate(dataset.nominal_rate_hz))?;
    let cell = prepare_cell(dataset, params, &featurizer, &base.coverage, None)?;
    let users = dataset.users();
    sizes
        .iter()
        .map(|&size| {
            let mut s = base.clone();
            s.enrollment_size = size;
            s.validate()?;
            let report = evaluate_cell(&cell, &s, &users)?;
            Ok(EnrollmentPoint {
                size,
                eer: report.mean.eer,
                metrics: report.mean,
            })
        })
        .collect()
}
