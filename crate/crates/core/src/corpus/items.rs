use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{preprocess_text, ReviewRecord, Vocabulary};

/// An item represented by its concatenated, encoded review text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDoc {
    pub item_id: String,
    pub term_ids: Vec<usize>,
    pub category_paths: Vec<Vec<String>>,
}

/// Items in ascending id order, plus the number of items dropped because
/// none of their terms are in the vocabulary.
#[derive(Clone, Debug, Default)]
pub struct ItemDocs {
    pub items: Vec<ItemDoc>,
    pub excluded: usize,
}

/// Concatenate each item's reviews in input order, encode, and truncate to
/// `max_doc_len` terms.
pub fn build_item_documents(
    records: &[ReviewRecord],
    vocabulary: &Vocabulary,
    max_doc_len: usize,
    categories: &BTreeMap<String, Vec<Vec<String>>>,
) -> ItemDocs {
    let mut per_item: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in records {
        let ids = per_item.entry(r.item_id.as_str()).or_default();
        if ids.len() < max_doc_len {
            ids.extend(vocabulary.encode(&preprocess_text(&r.text)));
        }
    }
    let mut out = ItemDocs::default();
    for (item_id, mut term_ids) in per_item {
        if term_ids.is_empty() {
            out.excluded += 1;
            continue;
        }
        term_ids.truncate(max_doc_len);
        out.items.push(ItemDoc {
            item_id: item_id.to_owned(),
            term_ids,
            category_paths: categories.get(item_id).cloned().unwrap_or_default(),
        });
    }
    out
}
