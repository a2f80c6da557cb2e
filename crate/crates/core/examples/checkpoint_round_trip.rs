//! Save a trained model as a checkpoint, load it back and score candidates
//! for a query and for a user.

use jsr::cli::{Checkpoint, RunConfig};
use jsr::corpus::{generate_synthetic_world, CorpusConfig, SyntheticParams};
use jsr::model::{Context, ModelConfig, ScoreRequest};
use jsr::training::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_world(&SyntheticParams::default(), &CorpusConfig { min_count: 1, ..Default::default() }, 0)?.bundle;
    let run = RunConfig {
        training: TrainConfig {
            max_steps: 100,
            eval_every: 50,
            model: ModelConfig { embed_dim: 8, user_dim: 8, repr_dim: 8, tower_hidden: 16, match_hidden: 8, pretrained_embeddings: None },
            ..Default::default()
        },
        ..Default::default()
    };
    let outcome = train::<f32>(&corpus, &run.training)?;
    let ckpt = Checkpoint {
        step: run.training.max_steps,
        config: run,
        vocabulary: corpus.vocabulary.terms().to_vec(),
        users: corpus.user_ids.clone(),
        model: outcome.last,
    };
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("joint.ckpt");
    ckpt.save(&path)?;
    let loaded = Checkpoint::<f32>::load(&path)?;
    println!("{} bytes, step {}, identical: {}", std::fs::metadata(&path)?.len(), loaded.step, loaded == ckpt);

    let query = &corpus.queries_test[0];
    let candidates: Vec<usize> = query.relevant.iter().chain(&query.non_relevant).copied().take(6).collect();
    let request = ScoreRequest { context: Context::Query(query.terms.clone()), candidates };
    for (item, score) in loaded.model.score_candidates(&request, &corpus.items)? {
        println!("query {} item {item}: {score:.4} relevant={}", query.query_id, query.relevant.contains(&item));
    }
    let request = ScoreRequest { context: Context::User(0), candidates: (0..5).collect() };
    for (item, score) in loaded.model.score_candidates(&request, &corpus.items)? {
        println!("user {} item {item}: {score:.4}", corpus.user_ids[0]);
    }
    Ok(())
}
