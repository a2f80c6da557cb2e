//! Select the learning rate and keep probability of the recommendation-only
//! model by validation loss.

use jsr::corpus::{generate_synthetic_world, CorpusConfig, SyntheticParams};
use jsr::model::ModelConfig;
use jsr::training::{grid_search, Grids, TrainConfig, TrainMode};

fn main() -> jsr::Result<()> {
    let params = SyntheticParams { n_users: 120, ..Default::default() };
    let corpus = generate_synthetic_world(&params, &CorpusConfig { min_count: 1, ..Default::default() }, 3)?.bundle;
    let base = TrainConfig {
        mode: TrainMode::RsOnly,
        max_steps: 200,
        eval_every: 50,
        model: ModelConfig { embed_dim: 8, user_dim: 8, repr_dim: 8, tower_hidden: 16, match_hidden: 8, pretrained_embeddings: None },
        ..Default::default()
    };
    let grids = Grids { learning_rates: vec![1e-4, 1e-3, 1e-2], ir_batches: vec![64], rs_batches: vec![32, 128], keep_probs: vec![0.8, 1.0] };
    let report = grid_search(&corpus, &base, &grids, None)?;
    for r in &report.results {
        let c = &r.config;
        println!("#{:<2} lr {:<7} rs_batch {:<4} keep {:<4} -> {:?}", r.index, c.learning_rate, c.rs_batch, c.keep_prob, r.valid_loss);
    }
    let b = &report.best;
    println!("selected lr {} rs_batch {} keep {} (validation loss {:.4})", b.learning_rate, b.rs_batch, b.keep_prob, report.best_valid_loss);
    Ok(())
}
