//! Evaluation protocols, threshold metrics and report output.

pub mod metrics;
pub mod protocol;
pub mod report;
pub mod split;

pub use metrics::{compute_eer, confusion_metrics, optimize_threshold_min_frr, Confusion, MetricSet, ScoredTrial};
pub use protocol::{
    default_grid, enrollment_sweep, far_by_activity, run_protocol, ActivityFarTable, CellReport, EvaluationReport,
    ProtocolKind, ProtocolSpec,
};
pub use split::{split_auth_terminal_agnostic, split_auth_terminal_specific, split_intent_user_agnostic, Split};
