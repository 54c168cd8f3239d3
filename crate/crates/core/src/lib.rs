//! Tap-gesture biometrics for wrist-worn inertial sensors.
//!
//! The pipeline runs from raw sensor streams through windowing and feature
//! extraction to random-forest scoring and the evaluation protocols for
//! user authentication and tap intent recognition.

pub mod bench;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod synth;
pub mod types;
pub mod window;

pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureSchema, FeatureVector, Featurizer};
pub use forest::{ForestConfig, ForestModel, TrainingSet};
pub use ingest::{load_dataset, ActivitySpan, Dataset, LoadOptions, LoadSummary, NfcEvent};
pub use types::{
    Activity, GestureWindow, QuaternionSample, SensorKind, SensorStream, SensorSubset, Terminal, TriaxialSample,
    WindowLabel, WindowParams,
};
pub use window::CoverageRule;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
