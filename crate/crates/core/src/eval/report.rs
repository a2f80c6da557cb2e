use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusBundle;
use crate::eval::{
    average_precision_at_k, hit_at_k_unit, ndcg_at_k, rank, recall_at_k, ApNormalizer,
};
use crate::model::{Context, MatchNet, ModelParams, Tower};
use crate::numerics::{Scalar, Tensor};
use crate::{Error, Result};

/// Cutoff of average precision.
pub const AP_CUTOFF: usize = 100;
/// Cutoff of NDCG, Hit and Recall.
pub const RANK_CUTOFF: usize = 10;

pub const RETRIEVAL_METRICS: [&str; 2] = ["MAP", "NDCG@10"];
pub const RECOMMENDATION_METRICS: [&str; 3] = ["NDCG", "Hit", "Recall"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Retrieval,
    Recommendation,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Retrieval => "retrieval",
            Side::Recommendation => "recommendation",
        }
    }

    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Side::Retrieval => &RETRIEVAL_METRICS,
            Side::Recommendation => &RECOMMENDATION_METRICS,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "retrieval" => Ok(Side::Retrieval),
            "recommendation" => Ok(Side::Recommendation),
            _ => Err(Error::Config(format!("unknown evaluation side {s:?}"))),
        }
    }
}

/// Candidate pool for a retrieval query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalPool {
    /// Every item in the corpus.
    #[default]
    Full,
    /// The query's relevant items plus its sampled non-relevant items.
    Sampled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub retrieval_pool: RetrievalPool,
    pub ap_normalizer: ApNormalizer,
}

/// Anything that scores candidate items for a context.
pub trait Scorer: Sync {
    fn score(&self, context: &Context, candidates: &[usize]) -> Result<Vec<f64>>;
}

impl<T> Scorer for T
where
    T: Fn(&Context, &[usize]) -> Result<Vec<f64>> + Sync,
{
    fn score(&self, context: &Context, candidates: &[usize]) -> Result<Vec<f64>> {
        self(context, candidates)
    }
}

/// Evaluation-mode model scores with item representations computed once.
pub struct ModelScorer<'a, F: Scalar> {
    model: &'a ModelParams<F>,
    item_reps: Tensor<F>,
    net: MatchNet,
}

impl<'a, F: Scalar> ModelScorer<'a, F> {
    pub fn new(model: &'a ModelParams<F>, corpus: &CorpusBundle, side: Side) -> Result<Self> {
        let (tower, net) = match side {
            Side::Retrieval => (Tower::IrItem, MatchNet::Retrieval),
            Side::Recommendation => (Tower::RsItem, MatchNet::Recommendation),
        };
        Ok(ModelScorer {
            model,
            item_reps: model.item_representations(&corpus.items, tower)?,
            net,
        })
    }
}

impl<F: Scalar> Scorer for ModelScorer<'_, F> {
    fn score(&self, context: &Context, candidates: &[usize]) -> Result<Vec<f64>> {
        let ctx = self.model.context_representation(context)?;
        let s = self.model.match_precomputed(&ctx, &self.item_reps, candidates, self.net)?;
        Ok(s.into_iter().map(Scalar::as_f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    /// Query id or user id.
    pub unit: String,
    /// One value per metric, in [`EvalReport::metrics`] order.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub side: Side,
    pub metrics: Vec<String>,
    /// Evaluated units in corpus order.
    pub units: Vec<UnitResult>,
    /// Arithmetic mean of each metric over `units`.
    pub aggregates: Vec<f64>,
    /// Units skipped for lack of relevant or held-out items.
    pub excluded: usize,
    pub notes: Vec<String>,
}

impl EvalReport {
    fn metric_index(&self, metric: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == metric)
    }

    pub fn aggregate(&self, metric: &str) -> Option<f64> {
        self.metric_index(metric).map(|k| self.aggregates[k])
    }

    pub fn values(&self, metric: &str) -> Option<Vec<f64>> {
        let k = self.metric_index(metric)?;
        Some(self.units.iter().map(|u| u.values[k]).collect())
    }

    /// Plain-text report: header comments, a per-unit table and an
    /// aggregate block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# side: {}", self.side.name());
        let _ = writeln!(out, "# units: {}", self.units.len());
        let _ = writeln!(out, "# excluded: {}", self.excluded);
        for note in &self.notes {
            let _ = writeln!(out, "# note: {note}");
        }
        let _ = writeln!(out, "unit\t{}", self.metrics.join("\t"));
        for u in &self.units {
            let vals: Vec<String> = u.values.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{}\t{}", u.unit, vals.join("\t"));
        }
        let _ = writeln!(out, "# aggregate");
        for (m, v) in self.metrics.iter().zip(&self.aggregates) {
            let _ = writeln!(out, "{m}\t{v:.6}");
        }
        out
    }
}

fn retrieval_unit(
    scorer: &dyn Scorer,
    corpus: &CorpusBundle,
    query: usize,
    config: &EvalConfig,
) -> Result<Option<UnitResult>> {
    let q = &corpus.queries_test[query];
    if q.relevant.is_empty() {
        return Ok(None);
    }
    let candidates: Vec<usize> = match config.retrieval_pool {
        RetrievalPool::Full => (0..corpus.n_items()).collect(),
        RetrievalPool::Sampled => {
            let mut c: Vec<usize> = q.relevant.iter().chain(&q.non_relevant).copied().collect();
            c.sort_unstable();
            c.dedup();
            c
        }
    };
    let scores = scorer.score(&Context::Query(q.terms.clone()), &candidates)?;
    let ranked = rank(candidates.into_iter().zip(scores).collect())?.items();
    Ok(Some(UnitResult {
        unit: q.query_id.clone(),
        values: vec![
            average_precision_at_k(&ranked, &q.relevant, AP_CUTOFF, config.ap_normalizer)?,
            ndcg_at_k(&ranked, &q.relevant, RANK_CUTOFF)?,
        ],
    }))
}

fn recommendation_unit(
    scorer: &dyn Scorer,
    corpus: &CorpusBundle,
    history: usize,
) -> Result<Option<UnitResult>> {
    let h = &corpus.histories[history];
    if h.test.is_empty() {
        return Ok(None);
    }
    let train: HashSet<usize> = h.train.iter().copied().collect();
    let candidates: Vec<usize> = (0..corpus.n_items()).filter(|i| !train.contains(i)).collect();
    let scores = scorer.score(&Context::User(h.user), &candidates)?;
    let ranked = rank(candidates.into_iter().zip(scores).collect())?.items();
    Ok(Some(UnitResult {
        unit: h.user_id.clone(),
        values: vec![
            ndcg_at_k(&ranked, &h.test, RANK_CUTOFF)?,
            hit_at_k_unit(&ranked, &h.test, RANK_CUTOFF)?,
            recall_at_k(&ranked, &h.test, RANK_CUTOFF)?,
        ],
    }))
}

/// Score every test unit of `side` with `scorer`. Units are evaluated in
/// parallel and reported in corpus order.
pub fn evaluate_with(
    scorer: &dyn Scorer,
    corpus: &CorpusBundle,
    side: Side,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let n = match side {
        Side::Retrieval => corpus.queries_test.len(),
        Side::Recommendation => corpus.histories.len(),
    };
    let results: Vec<Option<UnitResult>> = (0..n)
        .into_par_iter()
        .map(|k| match side {
            Side::Retrieval => retrieval_unit(scorer, corpus, k, config),
            Side::Recommendation => recommendation_unit(scorer, corpus, k),
        })
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    let units: Vec<UnitResult> = results.into_iter().flatten().collect();
    if units.is_empty() {
        return Err(Error::Evaluation(format!("no evaluable {} units", side.name())));
    }
    let metrics: Vec<String> = side.metrics().iter().map(|m| m.to_string()).collect();
    let aggregates = (0..metrics.len())
        .map(|k| units.iter().fold(0.0, |a, u| a + u.values[k]) / units.len() as f64)
        .collect();
    Ok(EvalReport {
        side,
        metrics,
        units,
        aggregates,
        excluded,
        notes: Vec::new(),
    })
}

/// Evaluate a trained model on the held-out units of `side`.
pub fn evaluate<F: Scalar>(
    model: &ModelParams<F>,
    corpus: &CorpusBundle,
    side: Side,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let scorer = ModelScorer::new(model, corpus, side)?;
    evaluate_with(&scorer, corpus, side, config)
}
