//! Rank scored items and compute the retrieval and recommendation metrics,
//! then test two systems' per-query scores for a difference.

use jsr::eval::{average_precision_at_k, hit_at_k, ndcg_at_k, paired_t_test, rank, recall_at_k, ApNormalizer};

fn main() -> jsr::Result<()> {
    // Ties fall back to ascending item id.
    let scored = vec![(4, 0.9), (1, 0.2), (7, 0.9), (2, 0.5), (9, -0.1)];
    let ranked = rank(scored)?.items();
    let relevant = [7, 2];
    println!("ranking {ranked:?}, relevant {relevant:?}");
    println!("MAP@100  {:.4}", average_precision_at_k(&ranked, &relevant, 100, ApNormalizer::MinRelevantK)?);
    println!("NDCG@10  {:.4}", ndcg_at_k(&ranked, &relevant, 10)?);
    println!("Recall@2 {:.4}", recall_at_k(&ranked, &relevant, 2)?);
    let units: [(&[usize], &[usize]); 2] = [(&ranked, &relevant), (&ranked, &[9])];
    println!("Hit@2 over two users {:.4}", hit_at_k(&units, 2)?);

    let a = [0.61, 0.42, 0.77, 0.50, 0.66, 0.58];
    let b = [0.55, 0.40, 0.70, 0.51, 0.60, 0.49];
    let t = paired_t_test(&a, &b)?;
    println!("paired t = {:.3}, df = {}, p = {:.4}", t.t, t.df, t.p);
    Ok(())
}
