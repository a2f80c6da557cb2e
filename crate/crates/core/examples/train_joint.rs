//! Train the joint model on a synthetic world and print its loss curve.

use jsr::corpus::{generate_synthetic_world, CorpusConfig, SyntheticParams};
use jsr::model::ModelConfig;
use jsr::training::{train, TrainConfig, TrainMode, TrainOutcome};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = generate_synthetic_world(&SyntheticParams::default(), &CorpusConfig { min_count: 1, ..Default::default() }, 0)?;
    let config = TrainConfig {
        mode: TrainMode::Joint,
        max_steps: 400,
        eval_every: 50,
        model: ModelConfig { embed_dim: 16, user_dim: 16, repr_dim: 16, tower_hidden: 32, match_hidden: 16, pretrained_embeddings: None },
        ..Default::default()
    };
    let outcome: TrainOutcome<f32> = train(&world.bundle, &config)?;
    println!("step\tl_ir\tl_rs\tl_total (validation)");
    for r in outcome.trace.valid_records() {
        println!("{}\t{:.4}\t{:.4}\t{:.4}", r.step, r.l_ir.unwrap_or(f64::NAN), r.l_rs.unwrap_or(f64::NAN), r.l_total);
    }
    println!("best step {:?}, validation loss {:?}", outcome.trace.best_step, outcome.trace.best_valid_loss);
    println!("final training loss {:?}", outcome.final_train_loss);
    Ok(())
}
