//! Ranking metrics, paired significance tests and the joint-versus-
//! individual comparison.
//!
//! Rankings are by descending score with ties broken by ascending item id.
//! Relevance is binary. Aggregates are arithmetic means over evaluated
//! units (queries for retrieval, users for recommendation); units without
//! relevant or held-out items are excluded and counted.

mod compare;
mod metrics;
mod report;
mod stats;

pub use compare::{compare, comparison_table, Comparison, MetricComparison, SIGNIFICANCE_LEVEL};
pub use metrics::{
    average_precision_at_k, hit_at_k, hit_at_k_unit, ndcg_at_k, rank, recall_at_k, ApNormalizer,
    RankedList,
};
pub use report::{
    evaluate, evaluate_with, EvalConfig, EvalReport, ModelScorer, RetrievalPool, Scorer, Side,
    UnitResult, AP_CUTOFF, RANK_CUTOFF, RECOMMENDATION_METRICS, RETRIEVAL_METRICS,
};
pub use stats::{ln_gamma, paired_t_test, regularized_incomplete_beta, TTest};
