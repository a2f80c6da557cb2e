//! Compare tape gradients of the joint loss against central differences in
//! double precision.

use jsr::corpus::{generate_synthetic_world, sample_ir_batch, sample_rs_batch, CorpusConfig, SyntheticParams};
use jsr::model::{DropoutMode, ModelConfig, ModelParams, ModelShape};
use jsr::numerics::{finite_difference_check, ParamSet};
use jsr::training::{joint_gradients, TaskData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> jsr::Result<()> {
    let params = SyntheticParams { n_categories: 4, items_per_category: 5, n_users: 10, purchases_per_user: 3, vocab_size: 40, doc_len: 6, ..Default::default() };
    let c = generate_synthetic_world(&params, &CorpusConfig { min_count: 1, query_test_fraction: 0.5, ..Default::default() }, 1)?.bundle;
    let config = ModelConfig { embed_dim: 4, user_dim: 4, repr_dim: 4, tower_hidden: 8, match_hidden: 4, pretrained_embeddings: None };
    let shape = ModelShape::new(&config, c.vocabulary.len(), c.n_users());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut model = ModelParams::<f64>::init(shape, &mut rng)?;
    // Move zero-initialised weights and biases off the ReLU kinks.
    let ids: Vec<_> = model.params().iter().filter(|(_, n, _)| *n == "term_weights" || n.ends_with(".bias")).map(|(id, _, _)| id).collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let data = TaskData { items: &c.items, queries: &c.queries_train, histories: &c.histories };
    let ir = sample_ir_batch(&c.queries_train, 6, &mut rng)?;
    let rs = sample_rs_batch(&c.histories, c.n_items(), 6, &mut rng)?;
    let loss = |p: &ParamSet<f64>| {
        let m = ModelParams::from_params(shape, p.clone())?;
        let (l, g) = joint_gradients(&m, data, &ir, &rs, DropoutMode::eval(), &mut ChaCha8Rng::seed_from_u64(0))?;
        Ok((l.l_total, g))
    };
    let report = finite_difference_check(loss, model.params(), 1e-6, 1e-4)?;
    for g in &report.groups {
        println!("{:<34} {:.2e}", g.name, g.max_rel_error);
    }
    println!("max relative error {:.2e}: {}", report.max_rel_error(), if report.passed() { "ok" } else { "FAILED" });
    Ok(())
}
