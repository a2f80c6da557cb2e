use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{preprocess_text, ItemDoc, Vocabulary};

/// A query with its relevant and sampled non-relevant items (indices into
/// the item list, ascending).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryJudgments {
    pub query_id: String,
    pub terms: Vec<usize>,
    pub relevant: Vec<usize>,
    pub non_relevant: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct GeneratedQueries {
    pub queries: Vec<QueryJudgments>,
    /// Category paths whose terms were all out of vocabulary.
    pub dropped: usize,
}

/// Separator used to turn a category path into a query id.
pub const PATH_SEPARATOR: &str = " > ";

/// Default number of non-relevant items: `min(100·|R|, |I| − |R|)`.
pub fn default_negative_pool(relevant: usize, items: usize) -> usize {
    (100 * relevant).min(items - relevant)
}

/// One query per distinct full category path. Query terms are the
/// preprocessed path terms, deduplicated in order; every item carrying the
/// path is relevant; non-relevant items are drawn uniformly from the rest.
pub fn generate_queries(
    items: &[ItemDoc],
    vocabulary: &Vocabulary,
    n_neg_eval: Option<usize>,
    seed: u64,
) -> GeneratedQueries {
    let mut by_path: BTreeMap<String, (Vec<String>, Vec<usize>)> = BTreeMap::new();
    for (idx, item) in items.iter().enumerate() {
        for path in &item.category_paths {
            let key = path.join(PATH_SEPARATOR);
            let entry = by_path.entry(key).or_insert_with(|| (path.clone(), Vec::new()));
            if entry.1.last() != Some(&idx) {
                entry.1.push(idx);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GeneratedQueries::default();
    for (query_id, (path, relevant)) in by_path {
        let mut tokens: Vec<String> = Vec::new();
        for part in &path {
            for t in preprocess_text(part) {
                if !tokens.contains(&t) {
                    tokens.push(t);
                }
            }
        }
        let terms = vocabulary.encode(&tokens);
        if terms.is_empty() {
            out.dropped += 1;
            continue;
        }
        let pool: Vec<usize> = (0..items.len())
            .filter(|i| relevant.binary_search(i).is_err())
            .collect();
        let n_neg = n_neg_eval
            .unwrap_or_else(|| default_negative_pool(relevant.len(), items.len()))
            .min(pool.len());
        let mut non_relevant: Vec<usize> = index::sample(&mut rng, pool.len(), n_neg)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        non_relevant.sort_unstable();
        out.queries.push(QueryJudgments {
            query_id,
            terms,
            relevant,
            non_relevant,
        });
    }
    out
}
