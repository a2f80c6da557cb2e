use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Candidates in descending score order, ascending item id on ties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<(usize, f64)>,
}

impl RankedList {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn items(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Order scored candidates. NaN scores and duplicate items are errors.
pub fn rank(mut scored: Vec<(usize, f64)>) -> Result<RankedList> {
    if let Some(&(item, _)) = scored.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::Evaluation(format!("item {item} has a NaN score")));
    }
    scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut seen = HashSet::with_capacity(scored.len());
    if let Some(&(item, _)) = scored.iter().find(|(i, _)| !seen.insert(*i)) {
        return Err(Error::Evaluation(format!("item {item} ranked twice")));
    }
    Ok(RankedList { entries: scored })
}

/// Denominator of average precision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApNormalizer {
    /// `min(|relevant|, k)`: a perfect top-k always scores 1.
    #[default]
    MinRelevantK,
    /// `|relevant|`.
    Relevant,
}

fn relevant_set(relevant: &[usize]) -> Result<HashSet<usize>> {
    if relevant.is_empty() {
        return Err(Error::Evaluation("relevant set is empty".into()));
    }
    Ok(relevant.iter().copied().collect())
}

/// Sum of precision@p over relevant positions `p ≤ k`, normalised.
pub fn average_precision_at_k(
    ranked: &[usize],
    relevant: &[usize],
    k: usize,
    normalizer: ApNormalizer,
) -> Result<f64> {
    let rel = relevant_set(relevant)?;
    let mut hits = 0usize;
    let mut total = 0.0;
    for (p, item) in ranked.iter().take(k).enumerate() {
        if rel.contains(item) {
            hits += 1;
            total += hits as f64 / (p + 1) as f64;
        }
    }
    let denom = match normalizer {
        ApNormalizer::MinRelevantK => rel.len().min(k),
        ApNormalizer::Relevant => rel.len(),
    };
    Ok(total / denom as f64)
}

/// Binary-gain NDCG with discount `1 / log2(rank + 1)`.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Result<f64> {
    let rel = relevant_set(relevant)?;
    let discount = |p: usize| 1.0 / ((p + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| rel.contains(i))
        .map(|(p, _)| discount(p))
        .fold(0.0, |a, x| a + x);
    let ideal: f64 = (0..rel.len().min(k)).map(discount).sum();
    Ok(dcg / ideal)
}

/// 1 when the top `k` contains a relevant item, else 0.
pub fn hit_at_k_unit(ranked: &[usize], relevant: &[usize], k: usize) -> Result<f64> {
    let rel = relevant_set(relevant)?;
    Ok(if ranked.iter().take(k).any(|i| rel.contains(i)) { 1.0 } else { 0.0 })
}

/// Fraction of units whose top `k` contains a relevant item.
pub fn hit_at_k(units: &[(&[usize], &[usize])], k: usize) -> Result<f64> {
    if units.is_empty() {
        return Err(Error::Evaluation("no evaluable users".into()));
    }
    let mut hits = 0.0;
    for (ranked, relevant) in units {
        hits += hit_at_k_unit(ranked, relevant, k)?;
    }
    Ok(hits / units.len() as f64)
}

/// `|top-k ∩ relevant| / |relevant|`.
pub fn recall_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Result<f64> {
    let rel = relevant_set(relevant)?;
    let found = ranked.iter().take(k).filter(|i| rel.contains(i)).count();
    Ok(found as f64 / rel.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_breaks_ties_by_id() {
        let r = rank(vec![(2, 0.9), (1, 0.9), (3, 0.1)]).unwrap();
        assert_eq!(r.items(), vec![1, 2, 3]);
        assert_eq!(rank(vec![(7, -1.0)]).unwrap().items(), vec![7]);
        assert!(matches!(rank(vec![(1, f64::NAN)]), Err(Error::Evaluation(_))));
        assert!(matches!(rank(vec![(1, 0.1), (1, 0.2)]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn average_precision_examples() {
        let ap = average_precision_at_k(&[4, 9, 5, 1], &[4, 5], 100, ApNormalizer::MinRelevantK).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision_at_k(&[1, 2, 3], &[1, 2], 100, ApNormalizer::MinRelevantK).unwrap(), 1.0);
        assert_eq!(average_precision_at_k(&[1, 2, 3], &[3], 2, ApNormalizer::MinRelevantK).unwrap(), 0.0);
        // three relevant items, cutoff two
        let ranked = [1, 2, 3];
        assert_eq!(average_precision_at_k(&ranked, &[1, 2, 3], 2, ApNormalizer::MinRelevantK).unwrap(), 1.0);
        let full = average_precision_at_k(&ranked, &[1, 2, 3], 2, ApNormalizer::Relevant).unwrap();
        assert!((full - 2.0 / 3.0).abs() < 1e-15);
        assert!(average_precision_at_k(&ranked, &[], 2, ApNormalizer::Relevant).is_err());
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[3, 1, 2], &[3], 10).unwrap(), 1.0);
        let second = ndcg_at_k(&[1, 3, 2], &[3], 10).unwrap();
        assert!((second - 0.630_929_753_571_457_4).abs() < 1e-15);
        let ranked: Vec<usize> = (0..11).collect();
        assert_eq!(ndcg_at_k(&ranked, &[10], 10).unwrap(), 0.0);
    }

    #[test]
    fn hit_and_recall_examples() {
        let a = [1, 2, 3];
        let b = [4, 5, 6];
        let units: Vec<(&[usize], &[usize])> = vec![(&a, &[2]), (&b, &[1]), (&a, &[3, 9])];
        assert!((hit_at_k(&units, 10).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(hit_at_k(&[], 10).is_err());
        let ranked: Vec<usize> = (0..20).collect();
        assert_eq!(recall_at_k(&ranked, &[1, 5, 15, 18], 10).unwrap(), 0.5);
        assert_eq!(recall_at_k(&ranked, &[9], 10).unwrap(), 1.0);
    }
}
