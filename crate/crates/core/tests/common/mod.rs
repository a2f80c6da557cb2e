//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use jsr::corpus::{ItemDoc, QueryJudgments, UserHistory, Vocabulary};
use jsr::model::{ModelConfig, ModelParams, ModelShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hand-built corpus pieces small enough for finite differences.
pub struct Toy {
    pub vocabulary: Vocabulary,
    pub items: Vec<ItemDoc>,
    pub queries: Vec<QueryJudgments>,
    pub histories: Vec<UserHistory>,
}

/// `|V| = 50`, 5 items, 3 users, 2 queries.
pub fn toy(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabulary = Vocabulary::from_terms((0..50).map(|t| format!("t{t}")).collect());
    let items = (0..5)
        .map(|i| ItemDoc {
            item_id: format!("i{i}"),
            term_ids: (0..6).map(|_| rng.random_range(0..50)).collect(),
            category_paths: vec![],
        })
        .collect();
    let queries = vec![
        QueryJudgments { query_id: "q0".into(), terms: vec![1, 7], relevant: vec![0, 1], non_relevant: vec![2, 3, 4] },
        QueryJudgments { query_id: "q1".into(), terms: vec![9], relevant: vec![3], non_relevant: vec![0, 1, 2, 4] },
    ];
    let histories = (0..3)
        .map(|u| UserHistory { user: u, user_id: format!("u{u}"), train: vec![u, u + 1], test: vec![u + 2] })
        .collect();
    Toy { vocabulary, items, queries, histories }
}

pub fn small_model_config(d: usize) -> ModelConfig {
    ModelConfig {
        embed_dim: d,
        user_dim: d,
        repr_dim: d,
        tower_hidden: 2 * d,
        match_hidden: d,
        pretrained_embeddings: None,
    }
}

pub fn init_model<F: jsr::numerics::Scalar>(config: &ModelConfig, vocab: usize, users: usize, seed: u64) -> ModelParams<F> {
    let shape = ModelShape::new(config, vocab, users);
    ModelParams::init(shape, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Order by descending score, ascending id on ties, via pairwise counting.
pub fn oracle_order(scored: &[(usize, f64)]) -> Vec<usize> {
    let mut slots = vec![usize::MAX; scored.len()];
    for &(i, s) in scored {
        let ahead = scored.iter().filter(|&&(j, t)| t > s || (t == s && j < i)).count();
        slots[ahead] = i;
    }
    slots
}

pub fn oracle_ap(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    let top = &ranked[..k.min(ranked.len())];
    let mut total = 0.0;
    for p in 0..top.len() {
        if relevant.contains(&top[p]) {
            let hits = top[..=p].iter().filter(|i| relevant.contains(i)).count();
            total += hits as f64 / (p + 1) as f64;
        }
    }
    total / relevant.len().min(k) as f64
}

pub fn oracle_ndcg(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    let gain = |p: usize| 1.0 / ((p + 2) as f64).log2();
    let mut dcg = 0.0;
    for (p, i) in ranked.iter().take(k).enumerate() {
        if relevant.contains(i) {
            dcg += gain(p);
        }
    }
    let mut ideal = 0.0;
    for p in 0..relevant.len().min(k) {
        ideal += gain(p);
    }
    dcg / ideal
}

pub fn oracle_hit(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if ranked.iter().take(k).any(|i| relevant.contains(i)) { 1.0 } else { 0.0 }
}

pub fn oracle_recall(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    ranked.iter().take(k).filter(|i| relevant.contains(i)).count() as f64 / relevant.len() as f64
}

/// A random ranking instance with at most 30 items and tied scores.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<(usize, f64)>, Vec<usize>) {
    let n = rng.random_range(1..=30);
    let scored: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random_range(0..8) as f64 / 4.0)).collect();
    let mut relevant: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
    if relevant.is_empty() {
        relevant.push(rng.random_range(0..n));
    }
    (scored, relevant)
}
