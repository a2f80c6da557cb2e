//! Invariants of samplers, splits, metrics and the loss, checked on random
//! inputs.

mod common;

use jsr::corpus::{sample_ir_batch, sample_rs_batch, split_recommendation, split_retrieval, QueryJudgments, UserHistory};
use jsr::eval::{average_precision_at_k, hit_at_k_unit, ndcg_at_k, paired_t_test, rank, recall_at_k, ApNormalizer};
use jsr::numerics::{ParamSet, Tape, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One query per mask: set bits are relevant, the rest non-relevant.
fn queries(n_items: usize, masks: &[u64]) -> Vec<QueryJudgments> {
    masks
        .iter()
        .enumerate()
        .filter_map(|(q, &mask)| {
            let relevant: Vec<usize> = (0..n_items).filter(|i| mask >> i & 1 == 1).collect();
            let non_relevant: Vec<usize> = (0..n_items).filter(|i| mask >> i & 1 == 0).collect();
            (!relevant.is_empty() && !non_relevant.is_empty()).then(|| QueryJudgments {
                query_id: format!("q{q}"),
                terms: vec![q],
                relevant,
                non_relevant,
            })
        })
        .collect()
}

fn ranking() -> impl Strategy<Value = (Vec<(usize, f64)>, Vec<usize>, usize)> {
    (1usize..30).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..6, n),
            proptest::collection::vec(any::<bool>(), n),
            0usize..n,
            1usize..40,
        )
            .prop_map(|(scores, marks, forced, k)| {
                let scored = scores.iter().enumerate().map(|(i, &s)| (i, s as f64 / 2.0)).collect();
                let mut relevant: Vec<usize> = (0..marks.len()).filter(|&i| marks[i]).collect();
                if relevant.is_empty() {
                    relevant.push(forced);
                }
                (scored, relevant, k)
            })
    })
}

proptest! {
    #[test]
    fn ir_triples_respect_judgments(
        n_items in 2usize..12,
        masks in proptest::collection::vec(any::<u64>(), 1..6),
        batch in 1usize..64,
        seed in any::<u64>(),
    ) {
        let qs = queries(n_items, &masks);
        prop_assume!(!qs.is_empty());
        let b = sample_ir_batch(&qs, batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(b.len(), batch);
        for t in &b.triples {
            let q = &qs[t.context];
            prop_assert!(q.relevant.contains(&t.positive));
            prop_assert!(q.non_relevant.contains(&t.negative));
        }
    }

    #[test]
    fn rs_negatives_avoid_training_items(
        n_items in 3usize..20,
        owned in proptest::collection::vec(proptest::collection::vec(0usize..20, 0..6), 1..8),
        batch in 1usize..64,
        seed in any::<u64>(),
    ) {
        let histories: Vec<UserHistory> = owned
            .iter()
            .enumerate()
            .map(|(u, items)| UserHistory {
                user: u,
                user_id: format!("u{u}"),
                train: items.iter().map(|i| i % (n_items - 1)).collect(),
                test: vec![],
            })
            .collect();
        prop_assume!(histories.iter().any(|h| !h.train.is_empty()));
        let b = sample_rs_batch(&histories, n_items, batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(b.len(), batch);
        for t in &b.triples {
            let h = &histories[t.context];
            prop_assert!(h.train.contains(&t.positive));
            prop_assert!(!h.train.contains(&t.negative));
            prop_assert!(t.negative < n_items);
        }
    }

    #[test]
    fn complementary_fractions_give_complementary_test_sets(
        (n, m) in (2usize..40).prop_flat_map(|n| (Just(n), 1..n)),
        seed in any::<u64>(),
    ) {
        // Fractions m/n, so both floors can be exact; at 1/2 both
        // fractions name the same split.
        prop_assume!(2 * m != n);
        let f = m as f64 / n as f64;
        let qs: Vec<QueryJudgments> = (0..n)
            .map(|q| QueryJudgments { query_id: format!("q{q}"), terms: vec![q], relevant: vec![0], non_relevant: vec![1] })
            .collect();
        let n_test = (n as f64 * f).floor() as usize;
        let g = 1.0 - f;
        prop_assume!(n_test > 0 && n_test < n && (n as f64 * g).floor() as usize == n - n_test);
        let (train_f, test_f) = split_retrieval(&qs, f, seed).unwrap();
        let (_, test_g) = split_retrieval(&qs, g, seed).unwrap();
        prop_assert_eq!(train_f, test_g);
        prop_assert_eq!(test_f.len(), n_test);
    }

    #[test]
    fn recommendation_split_partitions_every_user(
        favored in proptest::collection::vec(proptest::collection::btree_set(0usize..50, 0..12), 1..10),
        f in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let favored: Vec<Vec<usize>> = favored.into_iter().map(|s| s.into_iter().collect()).collect();
        let ids: Vec<String> = (0..favored.len()).map(|u| format!("u{u}")).collect();
        let split = split_recommendation(&ids, &favored, f, seed).unwrap();
        for (h, items) in split.iter().zip(&favored) {
            let mut union: Vec<usize> = h.train.iter().chain(&h.test).copied().collect();
            union.sort_unstable();
            prop_assert_eq!(&union, items);
            if items.len() >= 2 {
                prop_assert!(!h.train.is_empty() && !h.test.is_empty());
                let expected = ((items.len() as f64 * (1.0 - f)).ceil() as usize).clamp(1, items.len() - 1);
                prop_assert_eq!(h.train.len(), expected);
            } else {
                prop_assert!(h.test.is_empty());
            }
        }
    }

    #[test]
    fn rank_orders_by_score_then_id((scored, _, _) in ranking()) {
        let ranked = rank(scored.clone()).unwrap();
        prop_assert_eq!(ranked.items(), common::oracle_order(&scored));
        for w in ranked.entries().windows(2) {
            prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
    }

    #[test]
    fn metrics_match_oracles_and_stay_in_unit_range((scored, relevant, k) in ranking()) {
        let ranked = rank(scored).unwrap().items();
        let values = [
            (average_precision_at_k(&ranked, &relevant, k, ApNormalizer::MinRelevantK).unwrap(), common::oracle_ap(&ranked, &relevant, k)),
            (ndcg_at_k(&ranked, &relevant, k).unwrap(), common::oracle_ndcg(&ranked, &relevant, k)),
            (hit_at_k_unit(&ranked, &relevant, k).unwrap(), common::oracle_hit(&ranked, &relevant, k)),
            (recall_at_k(&ranked, &relevant, k).unwrap(), common::oracle_recall(&ranked, &relevant, k)),
        ];
        for (got, want) in values {
            prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
        }
    }

    #[test]
    fn ideal_ranking_scores_one((_, relevant, k) in ranking(), extra in 0usize..10) {
        let mut ranked = relevant.clone();
        ranked.extend(100..100 + extra);
        prop_assert!((ndcg_at_k(&ranked, &relevant, k).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((average_precision_at_k(&ranked, &relevant, k, ApNormalizer::MinRelevantK).unwrap() - 1.0).abs() < 1e-12);
        prop_assert_eq!(hit_at_k_unit(&ranked, &relevant, k).unwrap(), 1.0);
    }

    #[test]
    fn recall_grows_with_cutoff((scored, relevant, k) in ranking()) {
        let ranked = rank(scored).unwrap().items();
        prop_assert!(recall_at_k(&ranked, &relevant, k).unwrap() <= recall_at_k(&ranked, &relevant, k + 1).unwrap());
    }

    #[test]
    fn t_test_is_antisymmetric(
        pairs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..40),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert_eq!(ab.p, ba.p);
        prop_assert!((0.0..=1.0).contains(&ab.p));
        prop_assert_eq!(ab.df, a.len() - 1);
    }

    #[test]
    fn pair_loss_is_mean_softplus_of_margin(
        pairs in proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 1..20),
    ) {
        let (pos, neg): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let params = ParamSet::<f64>::new();
        let mut tape = Tape::new(&params);
        let p = tape.constant(Tensor::from_vec(pos)).unwrap();
        let n = tape.constant(Tensor::from_vec(neg)).unwrap();
        let loss = tape.pair_logistic_loss(p, n).unwrap();
        let want = pairs.iter().map(|(p, n)| (1.0 + (n - p).exp()).ln()).sum::<f64>() / pairs.len() as f64;
        prop_assert!((tape.item(loss) - want).abs() <= 1e-12 * want.max(1.0));
        prop_assert!(tape.item(loss) >= 0.0);
    }
}
