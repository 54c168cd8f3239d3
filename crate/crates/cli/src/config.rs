//! Run configuration: a TOML file with sections, overridden by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tapgesture::eval::protocol::{default_grid, ProtocolKind, ProtocolSpec};
use tapgesture::synth::PopulationParams;
use tapgesture::{FeatureConfig, ForestConfig, SensorSubset, WindowParams};

/// Shown under `--help`; parses to [`RunConfig::default`].
pub const DEFAULTS_HELP: &str = "\
Configuration file (TOML, every key optional, defaults shown):

  seed = 0                      # root seed; see below
  out = \"out\"

  [dataset]
  # path = \"data\"              # absent: sweep/train synthesize from [synth]
  gap_tolerance = 0.5           # a gap is a spacing > (1 + tolerance) periods

  [synth]
  users = 8
  gestures_per_user = 60
  activity_minutes_per_user = 30.0

  [evaluation]
  protocols = [\"auth_terminal_agnostic\", \"auth_terminal_specific\", \"intent_user_agnostic\"]
  seeds = 10                    # number of repetition seeds
  sensors = \"Acc,Gyr,LAc,GRV\"
  # enrollment_size = 12        # auth only; absent: all training gestures
  enrollment_sizes = []         # extra enrollment sweep (terminal-agnostic auth)
  folds = 10
  top_k = 5
  coverage = 0.9                # minimum fraction of nominal samples per window

  [grid]                        # absent lists: s 0.5..4.0, o -2.0..2.0, step 0.5
  # sizes = [2.5]
  # offsets = [0.0]

  [features]
  cutoff_hz = 10.0
  peak_prominence = 0.25

  [forest]
  n_trees = 100
  # mtry = 14                   # absent: floor(sqrt(features))
  # max_depth = 20              # absent: unlimited
  min_samples_split = 2

  [model]                       # train / eval / bench
  protocol = \"auth_terminal_agnostic\"
  # user = \"u001\"              # auth: positive class
  size = 2.5
  offset = 0.0
  repetitions = 10000

Seeds: with root seed r, synthesis uses master seed r, evaluation repeats use
seeds r, r+1, ..., r+seeds-1 and `train` uses forest seed r. Flags override
the file.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub dataset: DatasetSection,
    pub synth: SynthSection,
    pub evaluation: EvaluationSection,
    pub grid: GridSection,
    pub features: FeaturesSection,
    pub forest: ForestSection,
    pub model: ModelSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub path: Option<PathBuf>,
    pub gap_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub users: usize,
    pub gestures_per_user: usize,
    pub activity_minutes_per_user: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub protocols: Vec<String>,
    pub seeds: u64,
    pub sensors: String,
    pub enrollment_size: Option<usize>,
    pub enrollment_sizes: Vec<usize>,
    pub folds: usize,
    pub top_k: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub sizes: Option<Vec<f64>>,
    pub offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub cutoff_hz: f64,
    pub peak_prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub protocol: String,
    pub user: Option<String>,
    pub size: f64,
    pub offset: f64,
    pub repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            dataset: DatasetSection::default(),
            synth: SynthSection::default(),
            evaluation: EvaluationSection::default(),
            grid: GridSection::default(),
            features: FeaturesSection::default(),
            forest: ForestSection::default(),
            model: ModelSection::default(),
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { path: None, gap_tolerance: 0.5 }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        let p = PopulationParams::default();
        Self {
            users: p.n_users,
            gestures_per_user: p.gestures_per_user,
            activity_minutes_per_user: p.activity_minutes_per_user,
        }
    }
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            protocols: ProtocolKind::ALL.iter().map(|k| k.code().to_string()).collect(),
            seeds: 10,
            sensors: "Acc,Gyr,LAc,GRV".into(),
            enrollment_size: None,
            enrollment_sizes: Vec::new(),
            folds: 10,
            top_k: 5,
            coverage: 0.9,
        }
    }
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            cutoff_hz: f.cutoff_hz,
            peak_prominence: f.peak_prominence,
        }
    }
}

impl Default for ForestSection {
    fn default() -> Self {
        let f = ForestConfig::default();
        Self {
            n_trees: f.n_trees,
            mtry: f.mtry,
            max_depth: f.max_depth,
            min_samples_split: f.min_samples_split,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::AuthTerminalAgnostic.code().into(),
            user: None,
            size: 2.5,
            offset: 0.0,
            repetitions: 10_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.to_string(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn subset(&self) -> Result<SensorSubset, ConfigError> {
        self.evaluation.sensors.parse().map_err(|e| field("evaluation.sensors", e))
    }

    pub fn protocols(&self) -> Result<Vec<ProtocolKind>, ConfigError> {
        if self.evaluation.protocols.is_empty() {
            return Err(field("evaluation.protocols", "at least one protocol is required"));
        }
        self.evaluation
            .protocols
            .iter()
            .map(|p| p.parse().map_err(|e| field("evaluation.protocols", e)))
            .collect()
    }

    pub fn model_protocol(&self) -> Result<ProtocolKind, ConfigError> {
        self.model.protocol.parse().map_err(|e| field("model.protocol", e))
    }

    pub fn model_window(&self) -> Result<WindowParams, ConfigError> {
        WindowParams::new(self.model.size, self.model.offset).map_err(|e| field("model.size/offset", e))
    }

    pub fn population(&self) -> Result<PopulationParams, ConfigError> {
        let p = PopulationParams {
            n_users: self.synth.users,
            gestures_per_user: self.synth.gestures_per_user,
            activity_minutes_per_user: self.synth.activity_minutes_per_user,
            master_seed: self.seed,
        };
        p.validate().map_err(|e| field("synth", e))?;
        Ok(p)
    }

    pub fn feature_config(&self) -> Result<FeatureConfig, ConfigError> {
        let f = FeatureConfig {
            cutoff_hz: self.features.cutoff_hz,
            peak_prominence: self.features.peak_prominence,
            ..FeatureConfig::default()
        };
        f.alpha().map_err(|e| field("features.cutoff_hz", e))?;
        if !self.features.peak_prominence.is_finite() {
            return Err(field("features.peak_prominence", "must be finite"));
        }
        Ok(f)
    }

    pub fn forest_config(&self) -> Result<ForestConfig, ConfigError> {
        let f = &self.forest;
        if f.n_trees == 0 {
            return Err(field("forest.n_trees", "must be positive"));
        }
        if f.mtry == Some(0) {
            return Err(field("forest.mtry", "must be positive"));
        }
        if f.max_depth == Some(0) {
            return Err(field("forest.max_depth", "must be positive"));
        }
        if f.min_samples_split < 2 {
            return Err(field("forest.min_samples_split", "must be at least 2"));
        }
        Ok(ForestConfig {
            n_trees: f.n_trees,
            mtry: f.mtry,
            max_depth: f.max_depth,
            min_samples_split: f.min_samples_split,
            ..ForestConfig::default()
        })
    }

    pub fn grid(&self) -> Result<Vec<WindowParams>, ConfigError> {
        let (sizes, offsets) = match (&self.grid.sizes, &self.grid.offsets) {
            (None, None) => return Ok(default_grid()),
            (s, o) => (
                s.clone().unwrap_or_else(|| (1..=8).map(|i| i as f64 * 0.5).collect()),
                o.clone().unwrap_or_else(|| (-4..=4).map(|i| i as f64 * 0.5).collect()),
            ),
        };
        let mut grid = Vec::new();
        for &s in &sizes {
            for &o in &offsets {
                if let Ok(p) = WindowParams::new(s, o) {
                    if !grid.contains(&p) {
                        grid.push(p);
                    }
                }
            }
        }
        if grid.is_empty() {
            return Err(field("grid", "no feasible (size, offset) pair; need s > 0, o >= -2, s + o <= 4"));
        }
        Ok(grid)
    }

    pub fn seeds(&self) -> Result<Vec<u64>, ConfigError> {
        if self.evaluation.seeds == 0 {
            return Err(field("evaluation.seeds", "must be positive"));
        }
        self.seed
            .checked_add(self.evaluation.seeds - 1)
            .ok_or_else(|| field("evaluation.seeds", "seed range overflows"))?;
        Ok((0..self.evaluation.seeds).map(|i| self.seed + i).collect())
    }

    pub fn protocol_spec(&self, kind: ProtocolKind) -> Result<ProtocolSpec, ConfigError> {
        let mut spec = ProtocolSpec::new(kind);
        spec.grid = self.grid()?;
        spec.subset = self.subset()?;
        spec.seeds = self.seeds()?;
        spec.enrollment_size = if kind.is_auth() { self.evaluation.enrollment_size } else { None };
        spec.forest = self.forest_config()?;
        spec.features = self.feature_config()?;
        let c = self.evaluation.coverage;
        if !(c > 0.0 && c <= 1.0) {
            return Err(field("evaluation.coverage", "must lie in (0, 1]"));
        }
        spec.coverage.min_fraction = c;
        spec.fold_count = self.evaluation.folds;
        spec.top_k = self.evaluation.top_k;
        spec.validate().map_err(|e| field("evaluation", e))?;
        Ok(spec)
    }

    pub fn gap_tolerance(&self) -> Result<f64, ConfigError> {
        let t = self.dataset.gap_tolerance;
        if !(t.is_finite() && t >= 0.0) {
            return Err(field("dataset.gap_tolerance", "must be non-negative"));
        }
        Ok(t)
    }
}
