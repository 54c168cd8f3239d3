use std::path::PathBuf;

use crate::types::SensorKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("quaternion has zero norm")]
    ZeroNormQuaternion,

    #[error("infeasible window parameters s={size_s}, o={offset_s} (need s > 0, o >= -2, s + o <= 4)")]
    InvalidWindowParams { size_s: f64, offset_s: f64 },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("{file}:{line}: malformed record: {reason}")]
    MalformedRecord {
        file: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("stream {user}/{session} has no {sensor} samples")]
    MissingSensor {
        user: String,
        session: String,
        sensor: SensorKind,
    },

    #[error("dangling reference: {0}")]
    DanglingReference(String),

    #[error("required file missing: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("series is empty")]
    EmptySeries,

    #[error("low-pass cutoff {cutoff_hz} Hz must lie in (0, {rate_hz}/2)")]
    InvalidFilter { cutoff_hz: f64, rate_hz: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("training set contains a single class")]
    SingleClassTrainingSet,

    #[error("feature schema mismatch: expected {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("trials contain a single class")]
    SingleClassTrials,

    #[error("enrollment size {requested} exceeds the {available} available training gestures")]
    InsufficientEnrollment { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
