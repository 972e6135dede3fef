//! Scenario registry, configuration, execution and persistence.
//!
//! A scenario pairs a catalog model with a battery of diagnostics, each
//! carrying the decision the model's known structure predicts. Running a
//! scenario writes `curves.csv`, `verdicts.csv`, `record.json` and per-curve
//! plot data, and passes iff every predicted decision is observed.

mod emit;
mod registry;
mod report;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use emit::{format_number, write_outputs, CURVES_FILE, PLOT_DIR, RECORD_FILE, VERDICTS_FILE};
pub use registry::{find_scenario, scenarios, Check, Entry, EventSpec, Expect, Scenario, SetRef};
pub use report::{report, ReportRow};
pub use run::{execute, oracle, parse_prefix, run_scenario, ResultRecord, VerdictRecord};

use crate::diagnostics::Thresholds;
use crate::error::{Error, Result};
use crate::processes::{LagSpec, ModelKind};

/// Largest grid index a configuration may request.
pub const MAX_GRID_INDEX: u64 = 1 << 16;

/// Minimum number of paths; standard errors use 30 batches.
pub const MIN_PATHS: usize = 30;

/// A run request. Missing fields take the scenario's defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: Option<usize>,
    /// Replacement model parameters; the kind must match the scenario's.
    #[serde(default)]
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub lag: Option<LagSpec>,
    /// Replacement grid for every Monte Carlo diagnostic.
    #[serde(default)]
    pub grid: Option<Vec<u64>>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn for_scenario(id: &str) -> Self {
        ExperimentConfig {
            scenario: Some(id.into()),
            seed: 0,
            paths: None,
            model: None,
            lag: None,
            grid: None,
            thresholds: Thresholds::default(),
            out: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks that do not need the scenario.
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = self.paths {
            if p < MIN_PATHS.max(self.thresholds.batches) {
                return Err(Error::Config(format!("paths = {p}, at least {} are needed for batching", MIN_PATHS.max(self.thresholds.batches))));
            }
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g.windows(2).any(|w| w[0] >= w[1]) || g[0] == 0 {
                return Err(Error::Config("grid must be non-empty, positive and strictly increasing".into()));
            }
            if g[g.len() - 1] > MAX_GRID_INDEX {
                return Err(Error::Config(format!("grid index {} exceeds {MAX_GRID_INDEX}", g[g.len() - 1])));
            }
        }
        if let Some(l) = &self.lag {
            l.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}
