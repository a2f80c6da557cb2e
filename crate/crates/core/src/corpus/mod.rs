//! Data preparation: review ingestion, vocabulary, item documents,
//! category-path queries, train/test splits and pairwise samplers.

mod items;
mod queries;
mod records;
mod sampler;
mod split;
mod synthetic;
mod text;
mod vocab;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use items::{build_item_documents, ItemDoc, ItemDocs};
pub use queries::{default_negative_pool, generate_queries, GeneratedQueries, QueryJudgments, PATH_SEPARATOR};
pub use records::{load_metadata, load_reviews, Loaded, ReviewRecord};
pub use sampler::{sample_ir_batch, sample_rs_batch, BatchKind, MiniBatch, Triple};
pub use split::{cap_train_items, split_recommendation, split_retrieval, UserHistory};
pub use synthetic::{generate_synthetic_world, SyntheticParams, SyntheticWorld};
pub use text::{is_stopword, preprocess_text, STOPWORDS, STOPWORDS_VERSION};
pub use vocab::{build_vocabulary, Vocabulary};

use crate::Result;

/// Corpus construction and split settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub min_count: u64,
    pub max_vocab: Option<usize>,
    pub max_doc_len: usize,
    /// Non-relevant pool size per query; `None` means `min(100·|R|, |I|−|R|)`.
    pub n_neg_eval: Option<usize>,
    pub query_test_fraction: f64,
    pub user_test_fraction: f64,
    /// Thin every user's training items down to this many.
    pub rs_train_cap: Option<usize>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_count: 5,
            max_vocab: None,
            max_doc_len: 1000,
            n_neg_eval: None,
            query_test_fraction: 0.3,
            user_test_fraction: 0.3,
            rs_train_cap: None,
        }
    }
}

/// Counts reported alongside a prepared corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub reviews: usize,
    pub items: usize,
    pub users: usize,
    pub queries: usize,
    pub vocabulary: usize,
    pub excluded_items: usize,
    pub dropped_queries: usize,
    pub malformed_lines: usize,
}

/// Everything training and evaluation need: vocabulary, item documents and
/// both task splits over the shared item set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusBundle {
    pub vocabulary: Vocabulary,
    pub items: Vec<ItemDoc>,
    pub user_ids: Vec<String>,
    pub queries_train: Vec<QueryJudgments>,
    pub queries_test: Vec<QueryJudgments>,
    pub histories: Vec<UserHistory>,
    pub stats: CorpusStats,
}

impl CorpusBundle {
    /// Build a corpus from review records and item category metadata.
    pub fn from_records(
        records: &[ReviewRecord],
        categories: &BTreeMap<String, Vec<Vec<String>>>,
        config: &CorpusConfig,
        seed: u64,
    ) -> Result<CorpusBundle> {
        let tokens: Vec<Vec<String>> = records.iter().map(|r| preprocess_text(&r.text)).collect();
        let vocabulary = build_vocabulary(&tokens, config.min_count, config.max_vocab)?;
        let docs = build_item_documents(records, &vocabulary, config.max_doc_len, categories);

        let index: HashMap<&str, usize> = docs
            .items
            .iter()
            .enumerate()
            .map(|(i, d)| (d.item_id.as_str(), i))
            .collect();
        let mut favored: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for r in records {
            if let Some(&i) = index.get(r.item_id.as_str()) {
                let list = favored.entry(r.user_id.as_str()).or_default();
                if !list.contains(&i) {
                    list.push(i);
                }
            }
        }
        let user_ids: Vec<String> = favored.keys().map(|u| u.to_string()).collect();
        let favored: Vec<Vec<usize>> = favored.into_values().collect();

        let stats = CorpusStats {
            reviews: records.len(),
            excluded_items: docs.excluded,
            ..Default::default()
        };
        assemble(vocabulary, docs.items, user_ids, favored, stats, config, seed)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn item_terms(&self, item: usize) -> &[usize] {
        &self.items[item].term_ids
    }
}

pub(crate) fn assemble(
    vocabulary: Vocabulary,
    items: Vec<ItemDoc>,
    user_ids: Vec<String>,
    favored: Vec<Vec<usize>>,
    mut stats: CorpusStats,
    config: &CorpusConfig,
    seed: u64,
) -> Result<CorpusBundle> {
    let generated = generate_queries(&items, &vocabulary, config.n_neg_eval, derive_seed(seed, 1));
    let (queries_train, queries_test) =
        split_retrieval(&generated.queries, config.query_test_fraction, derive_seed(seed, 2))?;
    let mut histories =
        split_recommendation(&user_ids, &favored, config.user_test_fraction, derive_seed(seed, 3))?;
    if let Some(cap) = config.rs_train_cap {
        cap_train_items(&mut histories, cap);
    }
    stats.items = items.len();
    stats.users = user_ids.len();
    stats.queries = generated.queries.len();
    stats.vocabulary = vocabulary.len();
    stats.dropped_queries = generated.dropped;
    Ok(CorpusBundle {
        vocabulary,
        items,
        user_ids,
        queries_train,
        queries_test,
        histories,
        stats,
    })
}

/// Independent sub-stream seed (SplitMix64 finaliser over `seed` and `tag`).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
