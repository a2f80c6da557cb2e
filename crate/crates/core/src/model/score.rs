use std::collections::HashMap;

use rand::Rng;

use crate::corpus::ItemDoc;
use crate::model::{DenseStack, MatchNet, ModelParams, Tower};
use crate::numerics::{sigmoid, Scalar, Tape, Tensor, Var};
use crate::{Error, Result};

/// Whether dropout is active and at what keep probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutMode {
    pub training: bool,
    pub keep_prob: f64,
}

impl DropoutMode {
    pub fn eval() -> Self {
        DropoutMode {
            training: false,
            keep_prob: 1.0,
        }
    }

    pub fn train(keep_prob: f64) -> Self {
        DropoutMode {
            training: true,
            keep_prob,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreOutput {
    /// Pre-activation score, used by the training losses.
    Logit,
    /// Sigmoid of the logit.
    Probability,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Context {
    Query(Vec<usize>),
    User(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRequest {
    pub context: Context,
    pub candidates: Vec<usize>,
}

/// A deterministic stand-in RNG for evaluation calls: dropout never draws.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("evaluation mode never samples")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("evaluation mode never samples")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("evaluation mode never samples")
    }
}

impl<F: Scalar> ModelParams<F> {
    fn check_tape(&self, tape: &Tape<'_, F>) {
        debug_assert!(
            std::ptr::eq(tape.params(), self.params()),
            "tape must borrow this model's parameters"
        );
    }

    fn dense_stack<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_, F>,
        input: Var,
        stack: DenseStack,
        dropout: DropoutMode,
        rng: &mut R,
    ) -> Result<Var> {
        let (hw, hb) = (tape.param(stack.hidden_weight), tape.param(stack.hidden_bias));
        let (ow, ob) = (tape.param(stack.output_weight), tape.param(stack.output_bias));
        let h = tape.linear(input, hw, hb)?;
        let h = tape.relu(h)?;
        let h = tape.dropout(h, dropout.keep_prob, dropout.training, rng)?;
        tape.linear(h, ow, ob)
    }

    /// Representations of a batch of texts, `[docs.len(), width]`.
    pub fn embed_texts<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_, F>,
        docs: &[&[usize]],
        tower: Tower,
        dropout: DropoutMode,
        rng: &mut R,
    ) -> Result<Var> {
        self.check_tape(tape);
        if docs.is_empty() {
            return Err(Error::Representation("no texts to embed".into()));
        }
        let mut ids = Vec::with_capacity(docs.iter().map(|d| d.len()).sum());
        let mut offsets = Vec::with_capacity(docs.len() + 1);
        offsets.push(0);
        for d in docs {
            if d.is_empty() {
                return Err(Error::Representation("empty term sequence".into()));
            }
            if let Some(&bad) = d.iter().find(|&&t| t >= self.shape().vocab_size) {
                return Err(Error::Representation(format!(
                    "term id {bad} outside vocabulary of {}",
                    self.shape().vocab_size
                )));
            }
            ids.extend_from_slice(d);
            offsets.push(ids.len());
        }
        let w = tape.param(self.term_weights());
        let e = tape.param(self.term_embeddings());
        let raw = tape.gather(w, &ids)?;
        let weights = tape.segment_softmax(raw, &offsets)?;
        let rows = tape.gather(e, &ids)?;
        let pooled = tape.segment_weighted_sum(weights, rows, &offsets)?;
        self.dense_stack(tape, pooled, self.tower(tower), dropout, rng)
    }

    /// User embedding rows, `[users.len(), user_dim]`.
    pub fn embed_users(&self, tape: &mut Tape<'_, F>, users: &[usize]) -> Result<Var> {
        self.check_tape(tape);
        if let Some(&bad) = users.iter().find(|&&u| u >= self.shape().n_users) {
            return Err(Error::Lookup(format!(
                "user {bad} unknown (model has {} users)",
                self.shape().n_users
            )));
        }
        let u = tape.param(self.user_embeddings());
        tape.gather(u, users)
    }

    /// Matching network over the Hadamard product of two `[batch, width]`
    /// representations; returns logits `[batch, 1]`.
    pub fn match_logits<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_, F>,
        a: Var,
        b: Var,
        net: MatchNet,
        dropout: DropoutMode,
        rng: &mut R,
    ) -> Result<Var> {
        self.check_tape(tape);
        let joint = tape.mul(a, b)?;
        self.dense_stack(tape, joint, self.match_net(net), dropout, rng)
    }

    /// Representation vector of one text.
    pub fn embed_text<R: Rng + ?Sized>(
        &self,
        term_ids: &[usize],
        tower: Tower,
        dropout: DropoutMode,
        rng: &mut R,
    ) -> Result<Vec<F>> {
        let mut tape = Tape::new(self.params());
        let v = self.embed_texts(&mut tape, &[term_ids], tower, dropout, rng)?;
        Ok(tape.value(v).data().to_vec())
    }

    /// Row `user` of the user embedding table.
    pub fn embed_user(&self, user: usize) -> Result<Vec<F>> {
        if user >= self.shape().n_users {
            return Err(Error::Lookup(format!("user {user} unknown")));
        }
        Ok(self.params().get(self.user_embeddings()).row(user).to_vec())
    }

    /// Score a pair of precomputed representations.
    pub fn match_vectors<R: Rng + ?Sized>(
        &self,
        a: &[F],
        b: &[F],
        net: MatchNet,
        dropout: DropoutMode,
        rng: &mut R,
        output: ScoreOutput,
    ) -> Result<F> {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                op: "match",
                left: vec![a.len()],
                right: vec![b.len()],
            });
        }
        let mut tape = Tape::new(self.params());
        let av = tape.constant(Tensor::new(vec![1, a.len()], a.to_vec())?)?;
        let bv = tape.constant(Tensor::new(vec![1, b.len()], b.to_vec())?)?;
        let s = self.match_logits(&mut tape, av, bv, net, dropout, rng)?;
        let logit = tape.item(s);
        Ok(match output {
            ScoreOutput::Logit => logit,
            ScoreOutput::Probability => sigmoid(logit),
        })
    }

    /// Retrieval logit of one item for one query.
    pub fn retrieval_score<R: Rng + ?Sized>(
        &self,
        query_terms: &[usize],
        item_terms: &[usize],
        dropout: DropoutMode,
        rng: &mut R,
    ) -> Result<F> {
        let mut tape = Tape::new(self.params());
        let q = self.embed_texts(&mut tape, &[query_terms], Tower::Query, dropout, rng)?;
        let i = self.embed_texts(&mut tape, &[item_terms], Tower::IrItem, dropout, rng)?;
        let s = self.match_logits(&mut tape, q, i, MatchNet::Retrieval, dropout, rng)?;
        Ok(tape.item(s))
    }

    /// Recommendation logit of one item for one user.
    pub fn recommendation_score<R: Rng + ?Sized>(
        &self,
        user: usize,
        item_terms: &[usize],
        dropout: DropoutMode,
        rng: &mut R,
    ) -> Result<F> {
        let mut tape = Tape::new(self.params());
        let u = self.embed_users(&mut tape, &[user])?;
        let i = self.embed_texts(&mut tape, &[item_terms], Tower::RsItem, dropout, rng)?;
        let s = self.match_logits(&mut tape, u, i, MatchNet::Recommendation, dropout, rng)?;
        Ok(tape.item(s))
    }

    /// Evaluation-mode logits for every candidate, in request order. Each
    /// distinct item is embedded once.
    pub fn score_candidates(
        &self,
        request: &ScoreRequest,
        items: &[ItemDoc],
    ) -> Result<Vec<(usize, F)>> {
        if request.candidates.is_empty() {
            return Err(Error::Parameter("score request has no candidates".into()));
        }
        if let Some(&bad) = request.candidates.iter().find(|&&i| i >= items.len()) {
            return Err(Error::Lookup(format!("item {bad} unknown")));
        }
        let eval = DropoutMode::eval();
        let rng = &mut NoRng;
        let mut distinct: Vec<usize> = Vec::new();
        let mut position: HashMap<usize, usize> = HashMap::new();
        let rows: Vec<usize> = request
            .candidates
            .iter()
            .map(|&i| {
                *position.entry(i).or_insert_with(|| {
                    distinct.push(i);
                    distinct.len() - 1
                })
            })
            .collect();
        let docs: Vec<&[usize]> = distinct.iter().map(|&i| items[i].term_ids.as_slice()).collect();

        let mut tape = Tape::new(self.params());
        let (ctx, tower, net) = match &request.context {
            Context::Query(terms) => (
                self.embed_texts(&mut tape, &[terms.as_slice()], Tower::Query, eval, rng)?,
                Tower::IrItem,
                MatchNet::Retrieval,
            ),
            Context::User(u) => (
                self.embed_users(&mut tape, &[*u])?,
                Tower::RsItem,
                MatchNet::Recommendation,
            ),
        };
        let item_reps = self.embed_texts(&mut tape, &docs, tower, eval, rng)?;
        let item_rows = tape.gather(item_reps, &rows)?;
        let ctx_rows = tape.gather(ctx, &vec![0; rows.len()])?;
        let s = self.match_logits(&mut tape, ctx_rows, item_rows, net, eval, rng)?;
        Ok(request
            .candidates
            .iter()
            .copied()
            .zip(tape.value(s).data().iter().copied())
            .collect())
    }
}

impl<F: Scalar> ModelParams<F> {
    /// Evaluation-mode representations of `items` through `tower`, one row
    /// per item.
    pub fn item_representations(&self, items: &[ItemDoc], tower: Tower) -> Result<Tensor<F>> {
        if items.is_empty() {
            return Err(Error::Representation("no items to embed".into()));
        }
        let docs: Vec<&[usize]> = items.iter().map(|d| d.term_ids.as_slice()).collect();
        let mut tape = Tape::new(self.params());
        let v = self.embed_texts(&mut tape, &docs, tower, DropoutMode::eval(), &mut NoRng)?;
        Ok(tape.value(v).clone())
    }

    /// Evaluation-mode representation of a query or user.
    pub fn context_representation(&self, context: &Context) -> Result<Vec<F>> {
        match context {
            Context::Query(terms) => self.embed_text(terms, Tower::Query, DropoutMode::eval(), &mut NoRng),
            Context::User(u) => self.embed_user(*u),
        }
    }

    /// Evaluation-mode logits of `candidates` (rows of `item_reps`) against
    /// one context representation. Agrees bitwise with
    /// [`ModelParams::score_candidates`].
    pub fn match_precomputed(
        &self,
        context: &[F],
        item_reps: &Tensor<F>,
        candidates: &[usize],
        net: MatchNet,
    ) -> Result<Vec<F>> {
        if candidates.is_empty() {
            return Err(Error::Parameter("no candidates to score".into()));
        }
        let mut tape = Tape::new(self.params());
        let ctx = tape.constant(Tensor::new(vec![1, context.len()], context.to_vec())?)?;
        let reps = tape.constant(item_reps.clone())?;
        let ctx_rows = tape.gather(ctx, &vec![0; candidates.len()])?;
        let item_rows = tape.gather(reps, candidates)?;
        let s = self.match_logits(&mut tape, ctx_rows, item_rows, net, DropoutMode::eval(), &mut NoRng)?;
        Ok(tape.value(s).data().to_vec())
    }
}

/// Evaluation-mode scorer that never draws random numbers.
pub(crate) fn eval_rng() -> impl rand::RngCore {
    NoRng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelShape;
    use crate::numerics::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> ModelParams<f64> {
        let shape = ModelShape {
            vocab_size: 12,
            n_users: 4,
            embed_dim: 6,
            user_dim: 5,
            repr_dim: 5,
            tower_hidden: 8,
            match_hidden: 4,
        };
        let mut m = ModelParams::<f64>::init(shape, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        // non-uniform term weights so the weighting actually matters
        let w = m.term_weights();
        for (k, v) in m.params_mut().get_mut(w).data_mut().iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        m
    }

    fn items(docs: &[&[usize]]) -> Vec<ItemDoc> {
        docs.iter()
            .enumerate()
            .map(|(i, d)| ItemDoc {
                item_id: format!("i{i}"),
                term_ids: d.to_vec(),
                category_paths: vec![],
            })
            .collect()
    }

    /// Input to the tower's hidden layer, recomputed by hand.
    fn pooled(m: &ModelParams<f64>, terms: &[usize]) -> Vec<f64> {
        let w = m.params().get(m.term_weights()).data();
        let e = m.params().get(m.term_embeddings());
        let raw: Vec<f64> = terms.iter().map(|&t| w[t]).collect();
        let weights = crate::numerics::softmax_weights(&raw).unwrap();
        let mut out = vec![0.0; e.row_len()];
        for (&t, &a) in terms.iter().zip(&weights) {
            for (o, &x) in out.iter_mut().zip(e.row(t)) {
                *o += a * x;
            }
        }
        out
    }

    fn tower_of(m: &ModelParams<f64>, input: &[f64], tower: Tower) -> Vec<f64> {
        let mut tape = Tape::new(m.params());
        let x = tape.constant(Tensor::new(vec![1, input.len()], input.to_vec()).unwrap()).unwrap();
        let y = m
            .dense_stack(&mut tape, x, m.tower(tower), DropoutMode::eval(), &mut NoRng)
            .unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn single_term_feeds_its_embedding() {
        let m = model();
        let e = m.params().get(m.term_embeddings()).row(7).to_vec();
        let direct = tower_of(&m, &e, Tower::Query);
        let got = m.embed_text(&[7], Tower::Query, DropoutMode::eval(), &mut NoRng).unwrap();
        assert_eq!(got, direct);
    }

    #[test]
    fn equal_weights_average_embeddings() {
        let mut m = model();
        let w = m.term_weights();
        m.params_mut().get_mut(w).data_mut()[2] = 0.4;
        m.params_mut().get_mut(w).data_mut()[5] = 0.4;
        let e = m.params().get(m.term_embeddings());
        let mean: Vec<f64> = e.row(2).iter().zip(e.row(5)).map(|(a, b)| 0.5 * (a + b)).collect();
        let p = pooled(&m, &[2, 5]);
        for (a, b) in p.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-15);
        }
        let got = m.embed_text(&[2, 5], Tower::IrItem, DropoutMode::eval(), &mut NoRng).unwrap();
        let want = tower_of(&m, &p, Tower::IrItem);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn term_order_does_not_matter() {
        let m = model();
        let a = m.embed_text(&[1, 4, 9, 4], Tower::RsItem, DropoutMode::eval(), &mut NoRng).unwrap();
        let b = m.embed_text(&[4, 9, 4, 1], Tower::RsItem, DropoutMode::eval(), &mut NoRng).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_text_and_bad_ids_are_rejected() {
        let m = model();
        assert!(matches!(
            m.embed_text(&[], Tower::Query, DropoutMode::eval(), &mut NoRng),
            Err(Error::Representation(_))
        ));
        assert!(matches!(
            m.embed_text(&[99], Tower::Query, DropoutMode::eval(), &mut NoRng),
            Err(Error::Representation(_))
        ));
    }

    #[test]
    fn user_lookup() {
        let m = model();
        let u = m.embed_user(2).unwrap();
        assert_eq!(u.as_slice(), m.params().get(m.user_embeddings()).row(2));
        assert_ne!(m.embed_user(0).unwrap(), m.embed_user(1).unwrap());
        assert!(matches!(m.embed_user(4), Err(Error::Lookup(_))));
    }

    #[test]
    fn match_properties() {
        let m = model();
        let a = [0.3, -0.2, 0.9, 0.1, -0.5];
        let b = [1.1, 0.4, -0.3, 0.7, 0.2];
        let zero = [0.0; 5];
        let eval = DropoutMode::eval();
        let ab = m.match_vectors(&a, &b, MatchNet::Retrieval, eval, &mut NoRng, ScoreOutput::Logit).unwrap();
        let ba = m.match_vectors(&b, &a, MatchNet::Retrieval, eval, &mut NoRng, ScoreOutput::Logit).unwrap();
        assert_eq!(ab.to_bits(), ba.to_bits());
        let z1 = m.match_vectors(&zero, &a, MatchNet::Retrieval, eval, &mut NoRng, ScoreOutput::Logit).unwrap();
        let z2 = m.match_vectors(&zero, &b, MatchNet::Retrieval, eval, &mut NoRng, ScoreOutput::Logit).unwrap();
        assert_eq!(z1, z2);
        let p = m
            .match_vectors(&a, &b, MatchNet::Recommendation, eval, &mut NoRng, ScoreOutput::Probability)
            .unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(matches!(
            m.match_vectors(&a, &[1.0], MatchNet::Retrieval, eval, &mut NoRng, ScoreOutput::Logit),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn retrieval_score_composes_towers() {
        let m = model();
        let terms = [3, 8];
        let q = m.embed_text(&terms, Tower::Query, DropoutMode::eval(), &mut NoRng).unwrap();
        let i = m.embed_text(&terms, Tower::IrItem, DropoutMode::eval(), &mut NoRng).unwrap();
        let via_parts = m
            .match_vectors(&q, &i, MatchNet::Retrieval, DropoutMode::eval(), &mut NoRng, ScoreOutput::Logit)
            .unwrap();
        let direct = m.retrieval_score(&terms, &terms, DropoutMode::eval(), &mut NoRng).unwrap();
        assert!((via_parts - direct).abs() < 1e-14);
        assert_eq!(
            direct,
            m.retrieval_score(&terms, &terms, DropoutMode::eval(), &mut NoRng).unwrap()
        );
    }

    #[test]
    fn identical_towers_reduce_to_self_match() {
        let mut m = model();
        // copy the query tower into the retrieval item tower
        let (q, i) = (m.tower(Tower::Query), m.tower(Tower::IrItem));
        for (src, dst) in [
            (q.hidden_weight, i.hidden_weight),
            (q.hidden_bias, i.hidden_bias),
            (q.output_weight, i.output_weight),
            (q.output_bias, i.output_bias),
        ] {
            let t = m.params().get(src).clone();
            *m.params_mut().get_mut(dst) = t;
        }
        let terms = [0, 6, 11];
        let v = m.embed_text(&terms, Tower::Query, DropoutMode::eval(), &mut NoRng).unwrap();
        let self_match = m
            .match_vectors(&v, &v, MatchNet::Retrieval, DropoutMode::eval(), &mut NoRng, ScoreOutput::Logit)
            .unwrap();
        let score = m.retrieval_score(&terms, &terms, DropoutMode::eval(), &mut NoRng).unwrap();
        assert!((self_match - score).abs() < 1e-14);
    }

    #[test]
    fn zero_user_scores_all_items_alike() {
        let mut m = model();
        let u = m.user_embeddings();
        m.params_mut().get_mut(u).row_mut(1).fill(0.0);
        let a = m.recommendation_score(1, &[0, 1], DropoutMode::eval(), &mut NoRng).unwrap();
        let b = m.recommendation_score(1, &[7, 8, 9], DropoutMode::eval(), &mut NoRng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_mode_is_seeded() {
        let m = model();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            m.recommendation_score(0, &[1, 2, 3], DropoutMode::train(0.5), &mut rng).unwrap()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn precomputed_scores_are_bitwise_equal() {
        let m = model();
        let it = items(&[&[0, 1], &[2, 3, 4], &[5], &[6, 7, 8, 9]]);
        let candidates = vec![3, 1, 0];
        for (ctx, tower, net) in [
            (Context::Query(vec![2, 9]), Tower::IrItem, MatchNet::Retrieval),
            (Context::User(1), Tower::RsItem, MatchNet::Recommendation),
        ] {
            let reps = m.item_representations(&it, tower).unwrap();
            let c = m.context_representation(&ctx).unwrap();
            let fast = m.match_precomputed(&c, &reps, &candidates, net).unwrap();
            let req = ScoreRequest { context: ctx, candidates: candidates.clone() };
            let slow: Vec<f64> = m.score_candidates(&req, &it).unwrap().into_iter().map(|(_, s)| s).collect();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn batch_scores_match_sequential() {
        let m = model();
        let it = items(&[&[0, 1], &[2, 3, 4], &[5], &[6, 7, 8, 9], &[10, 11]]);
        let candidates = vec![4, 0, 2, 2, 1, 3];
        for ctx in [Context::Query(vec![1, 5]), Context::User(3)] {
            let req = ScoreRequest {
                context: ctx.clone(),
                candidates: candidates.clone(),
            };
            let batch = m.score_candidates(&req, &it).unwrap();
            assert_eq!(batch.len(), candidates.len());
            for (&(item, s), &c) in batch.iter().zip(&candidates) {
                assert_eq!(item, c);
                let single = match &ctx {
                    Context::Query(q) => m.retrieval_score(q, &it[c].term_ids, DropoutMode::eval(), &mut NoRng),
                    Context::User(u) => m.recommendation_score(*u, &it[c].term_ids, DropoutMode::eval(), &mut NoRng),
                }
                .unwrap();
                assert!((s - single).abs() < 1e-6);
            }
            assert_eq!(batch[2].1, batch[3].1);
        }
        let single = ScoreRequest {
            context: Context::User(0),
            candidates: vec![3],
        };
        assert_eq!(m.score_candidates(&single, &it).unwrap().len(), 1);
    }
}
