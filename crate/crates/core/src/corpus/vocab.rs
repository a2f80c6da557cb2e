use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Term to dense id mapping. Ids are assigned most-frequent-first with
/// lexicographic tie-breaks, so construction is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    frequency: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    frequency: Vec<u64>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.frequency)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            frequency: v.frequency,
        }
    }
}

impl Vocabulary {
    pub(crate) fn from_parts(terms: Vec<String>, frequency: Vec<u64>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            frequency,
            index,
        }
    }

    /// Terms with no recorded frequency, e.g. read back from a checkpoint.
    pub fn from_terms(terms: Vec<String>) -> Self {
        let n = terms.len();
        Vocabulary::from_parts(terms, vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.terms.get(id).map(String::as_str)
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequency[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Ids of in-vocabulary tokens; unknown tokens are dropped.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }

    /// Hex SHA-256 over the ordered term list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.terms {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Count term frequencies over `docs` and keep terms seen at least
/// `min_count` times, most frequent first, up to `max_size`.
pub fn build_vocabulary<D, S>(docs: D, min_count: u64, max_size: Option<usize>) -> Result<Vocabulary>
where
    D: IntoIterator,
    D::Item: AsRef<[S]>,
    S: AsRef<str>,
{
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        for tok in doc.as_ref() {
            *counts.entry(tok.as_ref().to_owned()).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(cap) = max_size {
        kept.truncate(cap);
    }
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "vocabulary is empty with min_count {min_count}"
        )));
    }
    let (terms, frequency) = kept.into_iter().unzip();
    Ok(Vocabulary::from_parts(terms, frequency))
}
