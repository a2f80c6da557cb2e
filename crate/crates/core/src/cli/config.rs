use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusConfig, SyntheticParams};
use crate::eval::EvalConfig;
use crate::training::{Grids, TrainConfig};
use crate::{Error, Result};

/// Where `prepare` reads its data from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    /// Review records plus item metadata files.
    Files,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub reviews: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub synthetic: SyntheticParams,
}

/// Per-mode hyperparameter selection used by `compare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Off: every mode trains with `[training]` as given.
    pub enabled: bool,
    /// Train only the first `budget` points of each mode's grid.
    pub budget: Option<usize>,
    pub learning_rates: Vec<f64>,
    pub ir_batches: Vec<usize>,
    pub rs_batches: Vec<usize>,
    pub keep_probs: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = Grids::default();
        GridConfig {
            enabled: false,
            budget: None,
            learning_rates: g.learning_rates,
            ir_batches: g.ir_batches,
            rs_batches: g.rs_batches,
            keep_probs: g.keep_probs,
        }
    }
}

impl GridConfig {
    pub fn grids(&self) -> Grids {
        Grids {
            learning_rates: self.learning_rates.clone(),
            ir_batches: self.ir_batches.clone(),
            rs_batches: self.rs_batches.clone(),
            keep_probs: self.keep_probs.clone(),
        }
    }
}

/// Everything a run needs. Every field has a default and unknown keys are
/// rejected. `training.seed` is always overwritten by the master `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for grid points and evaluation units; 0 means all
    /// cores.
    pub threads: usize,
    pub out: PathBuf,
    pub data: DataConfig,
    pub corpus: CorpusConfig,
    pub training: TrainConfig,
    pub eval: EvalConfig,
    pub grid: GridConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            out: PathBuf::from("run"),
            data: DataConfig::default(),
            corpus: CorpusConfig::default(),
            training: TrainConfig::default(),
            eval: EvalConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a config file, or start from defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                RunConfig::from_toml(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Apply overrides, propagate the master seed and check every section.
    pub fn resolve(mut self, overrides: &Overrides) -> Result<Self> {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = out.clone();
        }
        if let Some(threads) = overrides.threads {
            self.threads = threads;
        }
        self.training.seed = self.seed;
        self.training.validate()?;
        if self.data.source == DataSource::Files
            && (self.data.reviews.is_none() || self.data.metadata.is_none())
        {
            return Err(Error::Config(
                "data.source = \"files\" needs data.reviews and data.metadata".into(),
            ));
        }
        if self.grid.budget == Some(0) {
            return Err(Error::Config("grid.budget must be at least 1".into()));
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
