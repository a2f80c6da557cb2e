use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{derive_seed, CorpusBundle};
use crate::training::{train, TrainConfig, TrainMode};
use crate::{Error, Result};

/// Hyper-parameter values to search. Batch grids only apply to the modes
/// that sample the corresponding task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub learning_rates: Vec<f64>,
    pub ir_batches: Vec<usize>,
    pub rs_batches: Vec<usize>,
    pub keep_probs: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            learning_rates: vec![1e-5, 5e-5, 1e-4, 5e-4, 1e-3],
            ir_batches: vec![32, 64, 128, 256],
            rs_batches: vec![32, 64, 128, 256],
            keep_probs: vec![0.5, 0.8, 1.0],
        }
    }
}

/// Every grid point for `base.mode`, learning rate outermost, then IR
/// batch, RS batch, keep probability. Point `k` trains with a seed derived
/// from `(base.seed, k)`.
pub fn grid_points(base: &TrainConfig, grids: &Grids) -> Result<Vec<TrainConfig>> {
    let ir = if base.mode.uses_retrieval() { grids.ir_batches.clone() } else { vec![base.ir_batch] };
    let rs = if base.mode.uses_recommendation() { grids.rs_batches.clone() } else { vec![base.rs_batch] };
    if grids.learning_rates.is_empty() || ir.is_empty() || rs.is_empty() || grids.keep_probs.is_empty() {
        return Err(Error::Config("every searched grid must be non-empty".into()));
    }
    let mut points = Vec::new();
    for &learning_rate in &grids.learning_rates {
        for &ir_batch in &ir {
            for &rs_batch in &rs {
                for &keep_prob in &grids.keep_probs {
                    points.push(TrainConfig {
                        learning_rate,
                        ir_batch,
                        rs_batch,
                        keep_prob,
                        seed: derive_seed(base.seed, points.len() as u64),
                        ..base.clone()
                    });
                }
            }
        }
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub index: usize,
    pub config: TrainConfig,
    /// Best validation loss, absent when the run failed.
    pub valid_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub mode: TrainMode,
    /// Selected configuration, carrying the base seed.
    pub best: TrainConfig,
    pub best_valid_loss: f64,
    pub results: Vec<GridResult>,
}

/// Train the first `budget` grid points (all when `None`) in parallel and
/// select the lowest validation loss, earliest point on ties.
pub fn grid_search(
    corpus: &CorpusBundle,
    base: &TrainConfig,
    grids: &Grids,
    budget: Option<usize>,
) -> Result<GridSearchReport> {
    let mut points = grid_points(base, grids)?;
    if let Some(b) = budget {
        if b == 0 {
            return Err(Error::Config("grid budget must be at least 1".into()));
        }
        points.truncate(b);
    }
    let results: Vec<GridResult> = points
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| match train::<f32>(corpus, &config) {
            Ok(out) => GridResult {
                index,
                valid_loss: out.trace.best_valid_loss,
                config,
                error: None,
            },
            Err(failure) => GridResult {
                index,
                config,
                valid_loss: None,
                error: Some(failure.error.to_string()),
            },
        })
        .collect();
    let winner = results
        .iter()
        .filter_map(|r| r.valid_loss.map(|v| (v, r.index)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((best_valid_loss, index)) = winner else {
        let first = results.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Config(format!("every grid point failed; first error: {first}")));
    };
    let best = TrainConfig {
        seed: base.seed,
        ..results[index].config.clone()
    };
    Ok(GridSearchReport {
        mode: base.mode,
        best,
        best_valid_loss,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_world, CorpusConfig, SyntheticParams};
    use crate::model::ModelConfig;

    #[test]
    fn default_grid_sizes() {
        let count = |mode| grid_points(&TrainConfig { mode, ..Default::default() }, &Grids::default()).unwrap().len();
        assert_eq!(count(TrainMode::Joint), 240);
        assert_eq!(count(TrainMode::IrOnly), 60);
        assert_eq!(count(TrainMode::RsOnly), 60);
    }

    #[test]
    fn points_have_distinct_seeds_in_fixed_order() {
        let base = TrainConfig::default();
        let p = grid_points(&base, &Grids::default()).unwrap();
        assert_eq!(p[0].learning_rate, 1e-5);
        assert_eq!((p[0].ir_batch, p[0].rs_batch, p[0].keep_prob), (32, 32, 0.5));
        assert_eq!(p[1].keep_prob, 0.8);
        let mut seeds: Vec<u64> = p.iter().map(|c| c.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), p.len());
        assert_eq!(p, grid_points(&base, &Grids::default()).unwrap());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let g = Grids { keep_probs: vec![], ..Default::default() };
        assert!(grid_points(&TrainConfig::default(), &g).is_err());
        // an unused batch grid may be empty
        let g = Grids { ir_batches: vec![], ..Default::default() };
        let rs = TrainConfig { mode: TrainMode::RsOnly, ..Default::default() };
        assert_eq!(grid_points(&rs, &g).unwrap().len(), 60);
    }

    #[test]
    fn search_selects_argmin() {
        let params = SyntheticParams {
            n_categories: 3,
            items_per_category: 6,
            n_users: 15,
            purchases_per_user: 4,
            vocab_size: 40,
            doc_len: 6,
            cross_category_affinity: 0.2,
        };
        let corpus = generate_synthetic_world(
            &params,
            &CorpusConfig { query_test_fraction: 0.34, ..Default::default() },
            2,
        )
        .unwrap()
        .bundle;
        let base = TrainConfig {
            mode: TrainMode::RsOnly,
            max_steps: 10,
            eval_every: 5,
            validation_fraction: 0.2,
            model: ModelConfig {
                embed_dim: 4,
                user_dim: 4,
                repr_dim: 4,
                tower_hidden: 5,
                match_hidden: 3,
                pretrained_embeddings: None,
            },
            ..Default::default()
        };
        let grids = Grids {
            learning_rates: vec![1e-3, 1e-2],
            rs_batches: vec![8],
            keep_probs: vec![1.0, 0.5],
            ..Default::default()
        };
        let report = grid_search(&corpus, &base, &grids, Some(3)).unwrap();
        assert_eq!(report.results.len(), 3);
        let min = report.results.iter().filter_map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_valid_loss, min);
        assert_eq!(report.best.seed, base.seed);

        let single = Grids {
            learning_rates: vec![1e-3],
            rs_batches: vec![8],
            keep_probs: vec![1.0],
            ..Default::default()
        };
        let report = grid_search(&corpus, &base, &single, None).unwrap();
        assert_eq!(report.best.learning_rate, 1e-3);
        assert_eq!((report.best.rs_batch, report.best.keep_prob), (8, 1.0));
    }
}
