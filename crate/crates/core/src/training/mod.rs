//! Pairwise optimisation of the two models, alone or jointly.
//!
//! A joint step draws one retrieval batch and one recommendation batch,
//! sums the two mean pair losses and applies a single Adam update, so the
//! shared term embeddings and term weights receive the sum of both
//! gradients. Individual steps use one loss only and leave the other
//! model's private parameters untouched.

mod grid;
mod loss;
mod run;
mod validation;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::{Error, Result};

pub use grid::{grid_points, grid_search, GridResult, GridSearchReport, Grids};
pub use loss::{
    eval_losses, individual_gradients, individual_step, joint_gradients, joint_step,
    recommendation_loss, retrieval_loss, StepLosses, TaskData,
};
pub use run::{train, TrainFailure, TrainOutcome};
pub use validation::{
    ir_eval_triples, rs_eval_triples, split_validation, split_validation_histories, HeldOutHistories,
    split_validation_queries, ValidationSplit,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Joint,
    IrOnly,
    RsOnly,
}

impl TrainMode {
    pub const ALL: [TrainMode; 3] = [TrainMode::Joint, TrainMode::IrOnly, TrainMode::RsOnly];

    pub fn uses_retrieval(self) -> bool {
        self != TrainMode::RsOnly
    }

    pub fn uses_recommendation(self) -> bool {
        self != TrainMode::IrOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Joint => "joint",
            TrainMode::IrOnly => "ir_only",
            TrainMode::RsOnly => "rs_only",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown training mode {s:?}")))
    }
}

/// One training run. `ir_batch` is ignored by `rs_only` and `rs_batch` by
/// `ir_only`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub learning_rate: f64,
    pub ir_batch: usize,
    pub rs_batch: usize,
    pub keep_prob: f64,
    pub max_steps: usize,
    pub validation_fraction: f64,
    pub eval_every: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Joint,
            learning_rate: 1e-3,
            ir_batch: 64,
            rs_batch: 64,
            keep_prob: 0.8,
            max_steps: 2000,
            validation_fraction: 0.1,
            eval_every: 100,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.ir_batch == 0 || self.rs_batch == 0 {
            return bad("batch sizes must be at least 1".into());
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad(format!("keep_prob must be in (0, 1], got {}", self.keep_prob));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSplit {
    Train,
    Valid,
}

impl TraceSplit {
    pub fn name(self) -> &'static str {
        match self {
            TraceSplit::Train => "train",
            TraceSplit::Valid => "valid",
        }
    }
}

/// Loss components at one point of a run. A component is absent when the
/// mode does not optimise it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub split: TraceSplit,
    pub l_ir: Option<f64>,
    pub l_rs: Option<f64>,
    pub l_total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Step of the lowest validation loss, earliest on ties.
    pub best_step: Option<usize>,
    pub best_valid_loss: Option<f64>,
}

impl TrainTrace {
    pub fn train_records(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.split == TraceSplit::Train)
    }

    pub fn valid_records(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.split == TraceSplit::Valid)
    }

    pub const TSV_HEADER: &'static str = "step\tl_ir\tl_rs\tl_total\tsplit";

    /// Tab-separated rows under [`Self::TSV_HEADER`]; absent components
    /// are written as `NA`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::TSV_HEADER)?;
        for r in &self.records {
            writeln!(w, "{}", tsv_row(r))?;
        }
        Ok(())
    }
}

pub(crate) fn tsv_row(r: &TraceRecord) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    format!(
        "{}\t{}\t{}\t{}\t{}",
        r.step,
        opt(r.l_ir),
        opt(r.l_rs),
        r.l_total,
        r.split.name()
    )
}
