use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{QueryJudgments, UserHistory};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    Retrieval,
    Recommendation,
}

/// One pairwise training instance. `context` indexes the query slice (for
/// retrieval) or the user histories (for recommendation).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triple {
    pub context: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniBatch {
    pub kind: BatchKind,
    pub triples: Vec<Triple>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Uniform query, uniform positive from its relevant set, uniform negative
/// from its non-relevant set.
pub fn sample_ir_batch<R: Rng + ?Sized>(
    queries: &[QueryJudgments],
    batch_size: usize,
    rng: &mut R,
) -> Result<MiniBatch> {
    if queries.is_empty() {
        return Err(Error::Sampling("no training queries".into()));
    }
    if let Some(q) = queries
        .iter()
        .find(|q| q.relevant.is_empty() || q.non_relevant.is_empty())
    {
        return Err(Error::Sampling(format!(
            "query {:?} has an empty relevant or non-relevant set",
            q.query_id
        )));
    }
    let triples = (0..batch_size)
        .map(|_| {
            let context = rng.random_range(0..queries.len());
            let q = &queries[context];
            Triple {
                context,
                positive: q.relevant[rng.random_range(0..q.relevant.len())],
                negative: q.non_relevant[rng.random_range(0..q.non_relevant.len())],
            }
        })
        .collect();
    Ok(MiniBatch {
        kind: BatchKind::Retrieval,
        triples,
    })
}

/// Uniform user (among those with training items), uniform positive from
/// the user's training items, negative drawn uniformly from all items by
/// rejection of the user's training items.
pub fn sample_rs_batch<R: Rng + ?Sized>(
    histories: &[UserHistory],
    n_items: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<MiniBatch> {
    let eligible: Vec<usize> = histories
        .iter()
        .enumerate()
        .filter(|(_, h)| !h.train.is_empty())
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Sampling("no user has training items".into()));
    }
    if let Some(h) = histories.iter().find(|h| {
        let mut distinct = h.train.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.len() >= n_items
    }) {
        return Err(Error::Sampling(format!(
            "user {:?} owns every item; no negative can be drawn",
            h.user_id
        )));
    }
    let triples = (0..batch_size)
        .map(|_| {
            let context = eligible[rng.random_range(0..eligible.len())];
            let train = &histories[context].train;
            let positive = train[rng.random_range(0..train.len())];
            let negative = loop {
                let candidate = rng.random_range(0..n_items);
                if !train.contains(&candidate) {
                    break candidate;
                }
            };
            Triple {
                context,
                positive,
                negative,
            }
        })
        .collect();
    Ok(MiniBatch {
        kind: BatchKind::Recommendation,
        triples,
    })
}
