use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BatchKind, ItemDoc, MiniBatch, QueryJudgments, Triple, UserHistory};
use crate::model::{DropoutMode, MatchNet, ModelParams, Tower};
use crate::numerics::{AdamState, Gradients, Scalar, Tape, Var};
use crate::{Error, Result};

/// The data a loss reads: item documents, the query slice retrieval triples
/// index into, and the histories recommendation triples index into.
#[derive(Clone, Copy, Debug)]
pub struct TaskData<'a> {
    pub items: &'a [ItemDoc],
    pub queries: &'a [QueryJudgments],
    pub histories: &'a [UserHistory],
}

/// Losses of one step or one evaluation pass. `l_total` is the sum of the
/// present components, computed in the training precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub l_ir: Option<f64>,
    pub l_rs: Option<f64>,
    pub l_total: f64,
}

/// Distinct values in first-seen order plus, for every input, its position
/// among them.
fn distinct(values: impl Iterator<Item = usize>) -> (Vec<usize>, Vec<usize>) {
    let mut seen = HashMap::new();
    let mut order = Vec::new();
    let rows = values
        .map(|v| {
            *seen.entry(v).or_insert_with(|| {
                order.push(v);
                order.len() - 1
            })
        })
        .collect();
    (order, rows)
}

#[allow(clippy::too_many_arguments)]
fn pair_loss<F: Scalar, R: Rng + ?Sized>(
    model: &ModelParams<F>,
    tape: &mut Tape<'_, F>,
    items: &[ItemDoc],
    context: Var,
    context_rows: &[usize],
    triples: &[Triple],
    tower: Tower,
    net: MatchNet,
    dropout: DropoutMode,
    rng: &mut R,
) -> Result<Var> {
    if let Some(bad) = triples
        .iter()
        .flat_map(|t| [t.positive, t.negative])
        .find(|&i| i >= items.len())
    {
        return Err(Error::Lookup(format!("item {bad} unknown")));
    }
    let (ids, rows) = distinct(triples.iter().flat_map(|t| [t.positive, t.negative]));
    let docs: Vec<&[usize]> = ids.iter().map(|&i| items[i].term_ids.as_slice()).collect();
    let reps = model.embed_texts(tape, &docs, tower, dropout, rng)?;
    let pos_rows: Vec<usize> = rows.iter().step_by(2).copied().collect();
    let neg_rows: Vec<usize> = rows.iter().skip(1).step_by(2).copied().collect();
    let ctx = tape.gather(context, context_rows)?;
    let pos = tape.gather(reps, &pos_rows)?;
    let neg = tape.gather(reps, &neg_rows)?;
    let s_pos = model.match_logits(tape, ctx, pos, net, dropout, rng)?;
    let s_neg = model.match_logits(tape, ctx, neg, net, dropout, rng)?;
    tape.pair_logistic_loss(s_pos, s_neg)
}

/// Mean pair loss of retrieval triples; `context` indexes `data.queries`.
pub fn retrieval_loss<F: Scalar, R: Rng + ?Sized>(
    model: &ModelParams<F>,
    tape: &mut Tape<'_, F>,
    data: TaskData<'_>,
    triples: &[Triple],
    dropout: DropoutMode,
    rng: &mut R,
) -> Result<Var> {
    if triples.is_empty() {
        return Err(Error::Sampling("empty retrieval batch".into()));
    }
    if let Some(t) = triples.iter().find(|t| t.context >= data.queries.len()) {
        return Err(Error::Lookup(format!("query {} unknown", t.context)));
    }
    let (queries, rows) = distinct(triples.iter().map(|t| t.context));
    let docs: Vec<&[usize]> = queries.iter().map(|&q| data.queries[q].terms.as_slice()).collect();
    let ctx = model.embed_texts(tape, &docs, Tower::Query, dropout, rng)?;
    pair_loss(model, tape, data.items, ctx, &rows, triples, Tower::IrItem, MatchNet::Retrieval, dropout, rng)
}

/// Mean pair loss of recommendation triples; `context` indexes
/// `data.histories`.
pub fn recommendation_loss<F: Scalar, R: Rng + ?Sized>(
    model: &ModelParams<F>,
    tape: &mut Tape<'_, F>,
    data: TaskData<'_>,
    triples: &[Triple],
    dropout: DropoutMode,
    rng: &mut R,
) -> Result<Var> {
    if triples.is_empty() {
        return Err(Error::Sampling("empty recommendation batch".into()));
    }
    if let Some(t) = triples.iter().find(|t| t.context >= data.histories.len()) {
        return Err(Error::Lookup(format!("history {} unknown", t.context)));
    }
    let (users, rows) = distinct(triples.iter().map(|t| data.histories[t.context].user));
    let ctx = model.embed_users(tape, &users)?;
    pair_loss(model, tape, data.items, ctx, &rows, triples, Tower::RsItem, MatchNet::Recommendation, dropout, rng)
}

fn expect_kind(batch: &MiniBatch, kind: BatchKind) -> Result<()> {
    if batch.kind == kind {
        Ok(())
    } else {
        Err(Error::Parameter(format!("expected a {kind:?} batch, got {:?}", batch.kind)))
    }
}

fn finite(losses: StepLosses) -> Result<StepLosses> {
    if losses.l_total.is_finite() {
        Ok(losses)
    } else {
        Err(Error::Numeric(format!(
            "loss is not finite (ir {:?}, rs {:?}, total {})",
            losses.l_ir, losses.l_rs, losses.l_total
        )))
    }
}

/// Losses and gradients of `L_IR(b) + L_RS(b')` from one backward pass.
pub fn joint_gradients<F: Scalar, R: Rng + ?Sized>(
    model: &ModelParams<F>,
    data: TaskData<'_>,
    batch_ir: &MiniBatch,
    batch_rs: &MiniBatch,
    dropout: DropoutMode,
    rng: &mut R,
) -> Result<(StepLosses, Gradients<F>)> {
    expect_kind(batch_ir, BatchKind::Retrieval)?;
    expect_kind(batch_rs, BatchKind::Recommendation)?;
    let mut tape = Tape::new(model.params());
    let l_ir = retrieval_loss(model, &mut tape, data, &batch_ir.triples, dropout, rng)?;
    let l_rs = recommendation_loss(model, &mut tape, data, &batch_rs.triples, dropout, rng)?;
    let total = tape.add(l_ir, l_rs)?;
    let grads = tape.backward(total)?;
    let losses = StepLosses {
        l_ir: Some(tape.item(l_ir).as_f64()),
        l_rs: Some(tape.item(l_rs).as_f64()),
        l_total: tape.item(total).as_f64(),
    };
    Ok((finite(losses)?, grads))
}

/// Loss and gradients of a single task; the task follows `batch.kind`.
pub fn individual_gradients<F: Scalar, R: Rng + ?Sized>(
    model: &ModelParams<F>,
    data: TaskData<'_>,
    batch: &MiniBatch,
    dropout: DropoutMode,
    rng: &mut R,
) -> Result<(StepLosses, Gradients<F>)> {
    let mut tape = Tape::new(model.params());
    let (loss, losses) = match batch.kind {
        BatchKind::Retrieval => {
            let l = retrieval_loss(model, &mut tape, data, &batch.triples, dropout, rng)?;
            let v = tape.item(l).as_f64();
            (l, StepLosses { l_ir: Some(v), l_rs: None, l_total: v })
        }
        BatchKind::Recommendation => {
            let l = recommendation_loss(model, &mut tape, data, &batch.triples, dropout, rng)?;
            let v = tape.item(l).as_f64();
            (l, StepLosses { l_ir: None, l_rs: Some(v), l_total: v })
        }
    };
    let grads = tape.backward(loss)?;
    Ok((finite(losses)?, grads))
}

/// One joint update: both losses, one backward pass, one Adam step.
pub fn joint_step<F: Scalar, R: Rng + ?Sized>(
    model: &mut ModelParams<F>,
    adam: &mut AdamState<F>,
    data: TaskData<'_>,
    batch_ir: &MiniBatch,
    batch_rs: &MiniBatch,
    keep_prob: f64,
    rng: &mut R,
) -> Result<StepLosses> {
    let (losses, grads) =
        joint_gradients(model, data, batch_ir, batch_rs, DropoutMode::train(keep_prob), rng)?;
    adam.step(model.params_mut(), &grads)?;
    Ok(losses)
}

/// One update from a single task's loss.
pub fn individual_step<F: Scalar, R: Rng + ?Sized>(
    model: &mut ModelParams<F>,
    adam: &mut AdamState<F>,
    data: TaskData<'_>,
    batch: &MiniBatch,
    keep_prob: f64,
    rng: &mut R,
) -> Result<StepLosses> {
    let (losses, grads) =
        individual_gradients(model, data, batch, DropoutMode::train(keep_prob), rng)?;
    adam.step(model.params_mut(), &grads)?;
    Ok(losses)
}

/// Evaluation-mode losses over fixed triple sets. An empty set leaves its
/// component absent; at least one must be non-empty.
pub fn eval_losses<F: Scalar>(
    model: &ModelParams<F>,
    data: TaskData<'_>,
    ir_triples: &[Triple],
    rs_triples: &[Triple],
) -> Result<StepLosses> {
    let eval = DropoutMode::eval();
    let mut rng = crate::model::eval_rng();
    let ir = if ir_triples.is_empty() {
        None
    } else {
        let mut tape = Tape::new(model.params());
        let l = retrieval_loss(model, &mut tape, data, ir_triples, eval, &mut rng)?;
        Some(tape.item(l))
    };
    let rs = if rs_triples.is_empty() {
        None
    } else {
        let mut tape = Tape::new(model.params());
        let l = recommendation_loss(model, &mut tape, data, rs_triples, eval, &mut rng)?;
        Some(tape.item(l))
    };
    let total = match (ir, rs) {
        (Some(a), Some(b)) => a + b,
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Parameter("no triples to evaluate".into())),
    };
    finite(StepLosses {
        l_ir: ir.map(Scalar::as_f64),
        l_rs: rs.map(Scalar::as_f64),
        l_total: total.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{sample_ir_batch, sample_rs_batch, CorpusBundle, CorpusConfig};
    use crate::corpus::{generate_synthetic_world, SyntheticParams};
    use crate::model::{ModelConfig, ModelShape};
    use crate::numerics::AdamConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy_bundle(seed: u64) -> CorpusBundle {
        let params = SyntheticParams {
            n_categories: 4,
            items_per_category: 6,
            n_users: 12,
            purchases_per_user: 4,
            vocab_size: 60,
            doc_len: 8,
            cross_category_affinity: 0.2,
        };
        let config = CorpusConfig {
            query_test_fraction: 0.4,
            ..Default::default()
        };
        generate_synthetic_world(&params, &config, seed).unwrap().bundle
    }

    fn toy_model<F: Scalar>(bundle: &CorpusBundle, seed: u64) -> ModelParams<F> {
        let config = ModelConfig {
            embed_dim: 6,
            user_dim: 5,
            repr_dim: 5,
            tower_hidden: 7,
            match_hidden: 4,
            pretrained_embeddings: None,
        };
        let shape = ModelShape::new(&config, bundle.vocabulary.len(), bundle.n_users());
        ModelParams::init(shape, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn data(b: &CorpusBundle) -> TaskData<'_> {
        TaskData {
            items: &b.items,
            queries: &b.queries_train,
            histories: &b.histories,
        }
    }

    #[test]
    fn distinct_positions() {
        let (ids, rows) = distinct([5, 3, 5, 9, 3].into_iter());
        assert_eq!(ids, vec![5, 3, 9]);
        assert_eq!(rows, vec![0, 1, 0, 2, 1]);
    }

    #[test]
    fn joint_total_is_sum_and_gradients_add() {
        let b = toy_bundle(1);
        let m: ModelParams<f64> = toy_model(&b, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bi = sample_ir_batch(&b.queries_train, 8, &mut rng).unwrap();
        let br = sample_rs_batch(&b.histories, b.n_items(), 8, &mut rng).unwrap();
        let eval = DropoutMode::eval();
        let (j, gj) = joint_gradients(&m, data(&b), &bi, &br, eval, &mut rng).unwrap();
        let (i, gi) = individual_gradients(&m, data(&b), &bi, eval, &mut rng).unwrap();
        let (r, gr) = individual_gradients(&m, data(&b), &br, eval, &mut rng).unwrap();
        assert_eq!(j.l_ir, i.l_ir);
        assert_eq!(j.l_rs, r.l_rs);
        assert_eq!(j.l_total, j.l_ir.unwrap() + j.l_rs.unwrap());
        for id in [m.term_embeddings(), m.term_weights()] {
            let (a, x, y) = (gj.get(id).unwrap(), gi.get(id).unwrap(), gr.get(id).unwrap());
            for k in 0..a.len() {
                let sum = x.data()[k] + y.data()[k];
                let rel = (a.data()[k] - sum).abs() / sum.abs().max(1e-300);
                assert!(rel < 1e-10 || (a.data()[k] - sum).abs() < 1e-18);
            }
        }
        for id in m.recommendation_only() {
            assert!(gi.get(id).is_none());
        }
        for id in m.retrieval_only() {
            assert!(gr.get(id).is_none());
        }
    }

    #[test]
    fn ir_step_leaves_recommendation_parameters_alone() {
        let b = toy_bundle(4);
        let mut m: ModelParams<f32> = toy_model(&b, 5);
        let before = m.clone();
        let mut adam = AdamState::new(m.params(), AdamConfig::with_learning_rate(1e-2));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..3 {
            let batch = sample_ir_batch(&b.queries_train, 8, &mut rng).unwrap();
            individual_step(&mut m, &mut adam, data(&b), &batch, 0.8, &mut rng).unwrap();
        }
        for id in m.recommendation_only() {
            assert_eq!(m.params().get(id), before.params().get(id));
        }
        for id in [m.term_embeddings(), m.term_weights()] {
            assert_ne!(m.params().get(id), before.params().get(id));
        }
    }

    #[test]
    fn fresh_model_losses_near_ln2() {
        let b = toy_bundle(7);
        let m: ModelParams<f32> = toy_model(&b, 8);
        let ir: Vec<Triple> = crate::training::ir_eval_triples(&b.queries_train, 1);
        let rs: Vec<Triple> = (0..b.histories.len())
            .filter(|&h| !b.histories[h].train.is_empty())
            .map(|h| Triple {
                context: h,
                positive: b.histories[h].train[0],
                negative: (b.histories[h].train[0] + 1) % b.n_items(),
            })
            .collect();
        let l = eval_losses(&m, data(&b), &ir, &rs).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((l.l_ir.unwrap() - ln2).abs() < 0.1);
        assert!((l.l_rs.unwrap() - ln2).abs() < 0.1);
    }

    #[test]
    fn mismatched_batch_kind_is_rejected() {
        let b = toy_bundle(9);
        let m: ModelParams<f64> = toy_model(&b, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bi = sample_ir_batch(&b.queries_train, 4, &mut rng).unwrap();
        assert!(matches!(
            joint_gradients(&m, data(&b), &bi, &bi, DropoutMode::eval(), &mut rng),
            Err(Error::Parameter(_))
        ));
    }
}
