//! CSV and plain-text renderings of evaluation reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::metrics::MetricSet;
use crate::eval::protocol::{CellReport, EnrollmentPoint, EvaluationReport};

pub const TRIALS_HEADER: &str = "s,o,seed,split_id,precision,recall,f,eer,theta_eer,far_opt,theta_opt,far_delta";
pub const AGGREGATE_HEADER: &str =
    "s,o,rows,windows,excluded,precision,recall,f,eer,theta_eer,far_opt,theta_opt,far_delta";
pub const TOP_FEATURES_HEADER: &str = "s,o,rank,feature,count";
pub const ACTIVITY_HEADER: &str = "s,o,activity,trials,false_accepts,far,proportion";
pub const ENROLLMENT_HEADER: &str = "size,precision,recall,f,eer,far_opt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapMetric {
    FMeasure,
    Eer,
    Precision,
    Recall,
    FarAtMinFrr,
}

impl HeatmapMetric {
    pub fn code(self) -> &'static str {
        match self {
            HeatmapMetric::FMeasure => "f",
            HeatmapMetric::Eer => "eer",
            HeatmapMetric::Precision => "precision",
            HeatmapMetric::Recall => "recall",
            HeatmapMetric::FarAtMinFrr => "far_opt",
        }
    }

    fn pick(self, m: &MetricSet) -> f64 {
        match self {
            HeatmapMetric::FMeasure => m.f_measure,
            HeatmapMetric::Eer => m.eer,
            HeatmapMetric::Precision => m.precision,
            HeatmapMetric::Recall => m.recall,
            HeatmapMetric::FarAtMinFrr => m.far_at_min_frr,
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn metric_cols(m: &MetricSet) -> String {
    m.to_array().iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
}

fn cell_key(c: &CellReport) -> String {
    format!("{:.1},{:.1}", c.params.size_s(), c.params.offset_s())
}

pub fn trials_csv(report: &EvaluationReport) -> String {
    let mut s = format!("{TRIALS_HEADER}\n");
    for c in &report.cells {
        for r in &c.rows {
            let _ = writeln!(s, "{},{},{},{}", cell_key(c), r.seed, r.split_id, metric_cols(&r.metrics));
        }
    }
    s
}

pub fn aggregate_csv(report: &EvaluationReport) -> String {
    let mut s = format!("{AGGREGATE_HEADER}\n");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            cell_key(c),
            c.rows.len(),
            c.windows,
            c.excluded_windows,
            metric_cols(&c.mean)
        );
    }
    s
}

pub fn top_features_csv(report: &EvaluationReport, k: usize) -> String {
    let mut s = format!("{TOP_FEATURES_HEADER}\n");
    for c in &report.cells {
        for (rank, (name, count)) in c.top_features.iter().take(k).enumerate() {
            let _ = writeln!(s, "{},{},{name},{count}", cell_key(c), rank + 1);
        }
    }
    s
}

pub fn activity_far_csv(report: &EvaluationReport) -> String {
    let mut s = format!("{ACTIVITY_HEADER}\n");
    for c in &report.cells {
        let Some(t) = &c.activity_far else { continue };
        let rows = t
            .rows
            .iter()
            .map(|(a, f)| (a.code(), f))
            .chain([("combined", &t.combined), ("all", &t.all)]);
        for (name, f) in rows {
            let _ = writeln!(
                s,
                "{},{name},{},{},{},{}",
                cell_key(c),
                f.trials,
                f.false_accepts,
                num(f.far),
                num(f.proportion)
            );
        }
    }
    s
}

pub fn enrollment_csv(points: &[EnrollmentPoint]) -> String {
    let mut s = format!("{ENROLLMENT_HEADER}\n");
    for p in points {
        let size = p.size.map_or("full".to_string(), |k| k.to_string());
        let m = &p.metrics;
        let _ = writeln!(
            s,
            "{size},{},{},{},{},{}",
            num(m.precision),
            num(m.recall),
            num(m.f_measure),
            num(m.eer),
            num(m.far_at_min_frr)
        );
    }
    s
}

/// Sizes (rows) and offsets (columns) present in the report, ascending.
fn axes(report: &EvaluationReport) -> (Vec<i64>, Vec<i64>) {
    let sizes: BTreeSet<i64> = report.cells.iter().map(|c| c.params.size_ms()).collect();
    let offsets: BTreeSet<i64> = report.cells.iter().map(|c| c.params.offset_ms()).collect();
    (sizes.into_iter().collect(), offsets.into_iter().collect())
}

fn lookup(report: &EvaluationReport, s: i64, o: i64, metric: HeatmapMetric) -> Option<f64> {
    report
        .cells
        .iter()
        .find(|c| c.params.size_ms() == s && c.params.offset_ms() == o)
        .map(|c| metric.pick(&c.mean))
}

/// Matrix CSV: one row per size, one column per offset, empty where infeasible.
pub fn heatmap_csv(report: &EvaluationReport, metric: HeatmapMetric) -> String {
    let (sizes, offsets) = axes(report);
    let mut s = String::from("s\\o");
    for o in &offsets {
        let _ = write!(s, ",{:.1}", *o as f64 / 1000.0);
    }
    s.push('\n');
    for &size in &sizes {
        let _ = write!(s, "{:.1}", size as f64 / 1000.0);
        for &o in &offsets {
            s.push(',');
            if let Some(v) = lookup(report, size, o, metric) {
                s.push_str(&num(v));
            }
        }
        s.push('\n');
    }
    s
}

/// Aligned text grid, largest size on top, `.` where infeasible.
pub fn heatmap_text(report: &EvaluationReport, metric: HeatmapMetric) -> String {
    let (sizes, offsets) = axes(report);
    let mut s = format!("{} {} (rows s, columns o)\n", report.kind, metric.code());
    let _ = write!(s, "{:>6}", "s\\o");
    for o in &offsets {
        let _ = write!(s, " {:>6.1}", *o as f64 / 1000.0);
    }
    s.push('\n');
    for &size in sizes.iter().rev() {
        let _ = write!(s, "{:>6.1}", size as f64 / 1000.0);
        for &o in &offsets {
            match lookup(report, size, o, metric) {
                Some(v) => {
                    let _ = write!(s, " {v:>6.3}");
                }
                None => {
                    let _ = write!(s, " {:>6}", ".");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the per-trial, aggregate, top-feature, heatmap and (for intent)
/// activity FAR files for one report into `dir`, named by protocol.
pub fn write_report(dir: &Path, report: &EvaluationReport, top_k: usize) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let kind = report.kind.code();
    let mut files = vec![
        (format!("{kind}_trials.csv"), trials_csv(report)),
        (format!("{kind}_aggregate.csv"), aggregate_csv(report)),
        (format!("{kind}_top_features.csv"), top_features_csv(report, top_k)),
    ];
    for m in [HeatmapMetric::FMeasure, HeatmapMetric::Eer] {
        files.push((format!("{kind}_heatmap_{}.csv", m.code()), heatmap_csv(report, m)));
        files.push((format!("{kind}_heatmap_{}.txt", m.code()), heatmap_text(report, m)));
    }
    if report.cells.iter().any(|c| c.activity_far.is_some()) {
        files.push((format!("{kind}_far_by_activity.csv"), activity_far_csv(report)));
    }
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        write_text(&p, &body)?;
        out.push(p);
    }
    Ok(out)
}
