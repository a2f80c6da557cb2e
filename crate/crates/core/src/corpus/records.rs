use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

/// One review: evidence that `user_id` purchased `item_id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    pub text: String,
}

#[derive(Deserialize)]
struct ReviewLine {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    #[serde(rename = "reviewText")]
    review_text: String,
}

#[derive(Deserialize)]
struct MetadataLine {
    asin: String,
    #[serde(default)]
    categories: Vec<Vec<String>>,
}

/// Parsed records plus the 1-based line numbers that were skipped.
#[derive(Clone, Debug, Default)]
pub struct Loaded<T> {
    pub records: T,
    pub malformed_lines: Vec<usize>,
}

/// Malformed lines are tolerated up to 1% of the non-blank lines, and always
/// at least one.
fn malformed_budget(lines: usize) -> usize {
    (lines / 100).max(1)
}

fn parse_lines<T, F>(path: &Path, mut on_record: F) -> Result<Vec<usize>>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(T),
{
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut malformed = Vec::new();
    let mut total = 0usize;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<T>(line) {
            Ok(rec) => on_record(rec),
            Err(_) => malformed.push(n + 1),
        }
    }
    if malformed.len() > malformed_budget(total) {
        return Err(Error::Data(format!(
            "{}: {} of {} lines malformed (first at line {})",
            path.display(),
            malformed.len(),
            total,
            malformed[0]
        )));
    }
    Ok(malformed)
}

/// Read line-delimited review records with `reviewerID`, `asin` and
/// `reviewText` fields, preserving file order.
pub fn load_reviews(path: impl AsRef<Path>) -> Result<Loaded<Vec<ReviewRecord>>> {
    let mut records = Vec::new();
    let malformed_lines = parse_lines(path.as_ref(), |r: ReviewLine| {
        records.push(ReviewRecord {
            user_id: r.reviewer_id,
            item_id: r.asin,
            text: r.review_text,
        })
    })?;
    Ok(Loaded {
        records,
        malformed_lines,
    })
}

/// Category paths per item, from line-delimited `asin` / `categories`
/// records. Later lines for the same item add paths.
pub fn load_metadata(path: impl AsRef<Path>) -> Result<Loaded<BTreeMap<String, Vec<Vec<String>>>>> {
    let mut records: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    let malformed_lines = parse_lines(path.as_ref(), |m: MetadataLine| {
        let entry = records.entry(m.asin).or_default();
        for p in m.categories {
            if !p.is_empty() && !entry.contains(&p) {
                entry.push(p);
            }
        }
    })?;
    Ok(Loaded {
        records,
        malformed_lines,
    })
}
