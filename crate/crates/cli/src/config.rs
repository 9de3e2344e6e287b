use std::path::{Path, PathBuf};

use alldiff_select::features::FeatureSet;
use alldiff_select::learners::DEFAULT_FOLDS;
use alldiff_select::solver::{CostMode, OP_COST_SECONDS};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings read from an optional TOML file. Command-line flags take
/// precedence over every field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub time_limit: Option<f64>,
    pub runs_per_cell: Option<usize>,
    pub cost_mode: Option<CostMode>,
    pub feature_set: Option<FeatureSet>,
    pub sampling_seed: Option<u64>,
    pub fold_seed: Option<u64>,
    pub random_seed: Option<u64>,
    pub folds: Option<usize>,
    pub duplicate: Option<bool>,
    pub jobs: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Schema {
            path: path.to_path_buf(),
            msg: e.message().to_string(),
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        let cost_mode = self.cost_mode.unwrap_or_default();
        Snapshot {
            time_limit: self.time_limit.unwrap_or(3600.0),
            runs_per_cell: self.runs_per_cell.unwrap_or(match cost_mode {
                CostMode::Wallclock => 3,
                CostMode::Deterministic => 1,
            }),
            cost_mode,
            op_cost_seconds: OP_COST_SECONDS,
            feature_set: self.feature_set.unwrap_or(FeatureSet::Full),
            sampling_seed: self.sampling_seed.unwrap_or(0),
            fold_seed: self.fold_seed.unwrap_or(0),
            random_seed: self.random_seed.unwrap_or(0),
            folds: self.folds.unwrap_or(DEFAULT_FOLDS),
            duplicate: self.duplicate.unwrap_or(true),
        }
    }
}

/// Resolved settings recorded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time_limit: f64,
    pub runs_per_cell: usize,
    pub cost_mode: CostMode,
    pub op_cost_seconds: f64,
    pub feature_set: FeatureSet,
    pub sampling_seed: u64,
    pub fold_seed: u64,
    pub random_seed: u64,
    pub folds: usize,
    pub duplicate: bool,
}

pub fn require(path: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    path.ok_or_else(|| CliError::Input(format!("no {what} path given (use the flag or the config file)")))
}
