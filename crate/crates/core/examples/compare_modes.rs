//! Train joint, retrieval-only and recommendation-only models and print the
//! comparison table with paired t-tests.

use std::collections::HashMap;

use jsr::corpus::{generate_synthetic_world, CorpusConfig, SyntheticParams};
use jsr::eval::{compare, comparison_table, evaluate, EvalConfig, Side};
use jsr::model::ModelConfig;
use jsr::training::{train, TrainConfig, TrainMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus_config = CorpusConfig { min_count: 1, rs_train_cap: Some(3), ..Default::default() };
    let corpus = generate_synthetic_world(&SyntheticParams::default(), &corpus_config, 0)?.bundle;
    let model = ModelConfig { embed_dim: 16, user_dim: 16, repr_dim: 16, tower_hidden: 32, match_hidden: 16, pretrained_embeddings: None };
    let mut reports = HashMap::new();
    for mode in TrainMode::ALL {
        let config = TrainConfig { mode, max_steps: 400, eval_every: 50, model: model.clone(), ..Default::default() };
        let outcome = train::<f32>(&corpus, &config)?;
        for side in [Side::Retrieval, Side::Recommendation] {
            reports.insert((mode, side), evaluate(&outcome.best, &corpus, side, &EvalConfig::default())?);
        }
        println!("{mode}: best step {:?}", outcome.trace.best_step);
    }
    let retrieval = compare(&reports[&(TrainMode::Joint, Side::Retrieval)], &reports[&(TrainMode::IrOnly, Side::Retrieval)])?;
    let recommendation =
        compare(&reports[&(TrainMode::Joint, Side::Recommendation)], &reports[&(TrainMode::RsOnly, Side::Recommendation)])?;
    print!("{}", comparison_table(&[("Retrieval", &retrieval), ("Recommendation", &recommendation)]));
    for m in recommendation.metrics.iter().chain(&retrieval.metrics) {
        println!("{}: joint {:.4} individual {:.4} p {:?} significant {}", m.metric, m.joint, m.individual, m.p, m.significant);
    }
    Ok(())
}
