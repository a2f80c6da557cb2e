use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{derive_seed, QueryJudgments, Triple, UserHistory};
use crate::training::TrainMode;
use crate::{Error, Result};

/// Training data with a held-out validation part per optimised task.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSplit {
    pub fit_queries: Vec<QueryJudgments>,
    pub valid_queries: Vec<QueryJudgments>,
    pub fit_histories: Vec<UserHistory>,
    /// `(history index, held-out item)` pairs removed from `fit_histories`.
    pub valid_pairs: Vec<(usize, usize)>,
}

fn validation_count(n: usize, fraction: f64, what: &str) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("validation fraction must be in (0, 1), got {fraction}")));
    }
    let k = (n as f64 * fraction).ceil() as usize;
    if n < 2 || k >= n {
        return Err(Error::Config(format!(
            "{n} {what} cannot be split at fraction {fraction} with both sides non-empty"
        )));
    }
    Ok(k)
}

/// Hold out `ceil(n · fraction)` whole queries. Both sides keep the input
/// order.
pub fn split_validation_queries(
    queries: &[QueryJudgments],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<QueryJudgments>, Vec<QueryJudgments>)> {
    let k = validation_count(queries.len(), fraction, "training queries")?;
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held = vec![false; queries.len()];
    order[..k].iter().for_each(|&i| held[i] = true);
    let (valid, fit): (Vec<_>, Vec<_>) = queries.iter().cloned().zip(held).partition(|(_, h)| *h);
    Ok((
        fit.into_iter().map(|(q, _)| q).collect(),
        valid.into_iter().map(|(q, _)| q).collect(),
    ))
}

/// Users with their held-out item removed, and `(user, item)` pairs.
pub type HeldOutHistories = (Vec<UserHistory>, Vec<(usize, usize)>);

/// Hold out one training item from each of `ceil(m · fraction)` users,
/// sampled among the `m` users with at least two training items.
pub fn split_validation_histories(
    histories: &[UserHistory],
    fraction: f64,
    seed: u64,
) -> Result<HeldOutHistories> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("validation fraction must be in (0, 1), got {fraction}")));
    }
    let eligible: Vec<usize> = (0..histories.len())
        .filter(|&h| histories[h].train.len() >= 2)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Config(
            "no user has two training items to hold one out for validation".into(),
        ));
    }
    let k = ((eligible.len() as f64 * fraction).ceil() as usize).clamp(1, eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, eligible.len(), k)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    let mut fit = histories.to_vec();
    let mut pairs = Vec::with_capacity(k);
    for h in picked {
        let train = &mut fit[h].train;
        let item = train.remove(rng.random_range(0..train.len()));
        pairs.push((h, item));
    }
    Ok((fit, pairs))
}

/// Validation split for the tasks `mode` optimises; the other side passes
/// through whole with nothing held out.
pub fn split_validation(
    queries: &[QueryJudgments],
    histories: &[UserHistory],
    mode: TrainMode,
    fraction: f64,
    seed: u64,
) -> Result<ValidationSplit> {
    let (fit_queries, valid_queries) = if mode.uses_retrieval() {
        split_validation_queries(queries, fraction, derive_seed(seed, 1))?
    } else {
        (queries.to_vec(), Vec::new())
    };
    let (fit_histories, valid_pairs) = if mode.uses_recommendation() {
        split_validation_histories(histories, fraction, derive_seed(seed, 2))?
    } else {
        (histories.to_vec(), Vec::new())
    };
    Ok(ValidationSplit {
        fit_queries,
        valid_queries,
        fit_histories,
        valid_pairs,
    })
}

/// Every (query, relevant item) pair with one seeded non-relevant item.
pub fn ir_eval_triples(queries: &[QueryJudgments], seed: u64) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (context, q) in queries.iter().enumerate() {
        if q.non_relevant.is_empty() {
            continue;
        }
        for &positive in &q.relevant {
            let negative = q.non_relevant[rng.random_range(0..q.non_relevant.len())];
            out.push(Triple {
                context,
                positive,
                negative,
            });
        }
    }
    out
}

/// `negatives` seeded triples per `(history, item)` pair, with negatives
/// drawn uniformly from items the user has not trained on and that differ
/// from the positive.
pub fn rs_eval_triples(
    histories: &[UserHistory],
    pairs: &[(usize, usize)],
    n_items: usize,
    negatives: usize,
    seed: u64,
) -> Result<Vec<Triple>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pairs.len() * negatives);
    for &(h, positive) in pairs {
        let train = &histories
            .get(h)
            .ok_or_else(|| Error::Lookup(format!("history {h} unknown")))?
            .train;
        let excluded = |i: usize| i == positive || train.contains(&i);
        if (0..n_items).all(excluded) {
            continue;
        }
        for _ in 0..negatives {
            let negative = loop {
                let i = rng.random_range(0..n_items);
                if !excluded(i) {
                    break i;
                }
            };
            out.push(Triple {
                context: h,
                positive,
                negative,
            });
        }
    }
    Ok(out)
}
