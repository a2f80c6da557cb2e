use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{ParamId, ParamSet, Scalar, Tensor};
use crate::{Error, Result};

/// Layer widths. The text towers map `embed_dim → tower_hidden → repr_dim`
/// (the recommendation item tower ends at `user_dim`), and the matching
/// networks map `width → match_hidden → 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub user_dim: usize,
    pub repr_dim: usize,
    pub tower_hidden: usize,
    pub match_hidden: usize,
    /// Optional word-vector file used to initialise term embeddings.
    pub pretrained_embeddings: Option<std::path::PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 200,
            user_dim: 200,
            repr_dim: 200,
            tower_hidden: 512,
            match_hidden: 128,
            pretrained_embeddings: None,
        }
    }
}

/// Every dimension needed to lay out the parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub vocab_size: usize,
    pub n_users: usize,
    pub embed_dim: usize,
    pub user_dim: usize,
    pub repr_dim: usize,
    pub tower_hidden: usize,
    pub match_hidden: usize,
}

impl ModelShape {
    pub fn new(config: &ModelConfig, vocab_size: usize, n_users: usize) -> Self {
        ModelShape {
            vocab_size,
            n_users,
            embed_dim: config.embed_dim,
            user_dim: config.user_dim,
            repr_dim: config.repr_dim,
            tower_hidden: config.tower_hidden,
            match_hidden: config.match_hidden,
        }
    }

    fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("n_users", self.n_users),
            ("embed_dim", self.embed_dim),
            ("user_dim", self.user_dim),
            ("repr_dim", self.repr_dim),
            ("tower_hidden", self.tower_hidden),
            ("match_hidden", self.match_hidden),
        ];
        match dims.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }

    /// Expected tensor shapes, in parameter order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = vec![
            ("term_embeddings".to_string(), vec![self.vocab_size, self.embed_dim]),
            ("term_weights".to_string(), vec![self.vocab_size]),
            ("user_embeddings".to_string(), vec![self.n_users, self.user_dim]),
        ];
        let mut stack = |prefix: &str, n_in: usize, hidden: usize, n_out: usize| {
            out.push((format!("{prefix}.hidden.weight"), vec![hidden, n_in]));
            out.push((format!("{prefix}.hidden.bias"), vec![hidden]));
            out.push((format!("{prefix}.output.weight"), vec![n_out, hidden]));
            out.push((format!("{prefix}.output.bias"), vec![n_out]));
        };
        stack(Tower::Query.prefix(), self.embed_dim, self.tower_hidden, self.repr_dim);
        stack(Tower::IrItem.prefix(), self.embed_dim, self.tower_hidden, self.repr_dim);
        stack(Tower::RsItem.prefix(), self.embed_dim, self.tower_hidden, self.user_dim);
        stack(MatchNet::Retrieval.prefix(), self.repr_dim, self.match_hidden, 1);
        stack(MatchNet::Recommendation.prefix(), self.user_dim, self.match_hidden, 1);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tower {
    /// Query text for retrieval.
    Query,
    /// Item text for retrieval.
    IrItem,
    /// Item text for recommendation.
    RsItem,
}

impl Tower {
    pub fn prefix(self) -> &'static str {
        match self {
            Tower::Query => "query_tower",
            Tower::IrItem => "ir_item_tower",
            Tower::RsItem => "rs_item_tower",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatchNet {
    Retrieval,
    Recommendation,
}

impl MatchNet {
    pub fn prefix(self) -> &'static str {
        match self {
            MatchNet::Retrieval => "retrieval_match",
            MatchNet::Recommendation => "recommendation_match",
        }
    }
}

/// Parameter handles of a hidden layer followed by an output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseStack {
    pub hidden_weight: ParamId,
    pub hidden_bias: ParamId,
    pub output_weight: ParamId,
    pub output_bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub term_embeddings: ParamId,
    pub term_weights: ParamId,
    pub user_embeddings: ParamId,
    pub query: DenseStack,
    pub ir_item: DenseStack,
    pub rs_item: DenseStack,
    pub retrieval: DenseStack,
    pub recommendation: DenseStack,
}

/// All trainable tensors of both models.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    shape: ModelShape,
    params: ParamSet<F>,
    pub(crate) layout: Layout,
}

impl<F: Scalar> ModelParams<F> {
    /// Random initialisation: embeddings `U(−0.05, 0.05)`, term weights
    /// zero, dense weights Glorot-uniform, biases zero.
    pub fn init<R: Rng + ?Sized>(shape: ModelShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let small = Uniform::new_inclusive(-0.05, 0.05).expect("valid range");
        let mut params = ParamSet::new();
        for (name, dims) in shape.layout() {
            let tensor = if name == "term_weights" || name.ends_with(".bias") {
                Tensor::zeros(&dims)
            } else if name.ends_with("_embeddings") {
                Tensor::from_fn(&dims, |_| F::of(small.sample(rng)))
            } else {
                let limit = (6.0 / (dims[0] + dims[1]) as f64).sqrt();
                let glorot = Uniform::new_inclusive(-limit, limit).expect("valid range");
                Tensor::from_fn(&dims, |_| F::of(glorot.sample(rng)))
            };
            params.insert(name, tensor);
        }
        Self::from_params(shape, params)
    }

    /// Wrap an existing parameter set, checking names and shapes.
    pub fn from_params(shape: ModelShape, params: ParamSet<F>) -> Result<Self> {
        shape.validate()?;
        let expected = shape.layout();
        if expected.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, dims) in &expected {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            let actual = params.get(id).shape();
            if actual != dims.as_slice() {
                return Err(Error::Dimension {
                    op: "model parameters",
                    left: actual.to_vec(),
                    right: dims.clone(),
                });
            }
        }
        let id = |n: &str| params.id(n).expect("checked above");
        let stack = |p: &str| DenseStack {
            hidden_weight: id(&format!("{p}.hidden.weight")),
            hidden_bias: id(&format!("{p}.hidden.bias")),
            output_weight: id(&format!("{p}.output.weight")),
            output_bias: id(&format!("{p}.output.bias")),
        };
        let layout = Layout {
            term_embeddings: id("term_embeddings"),
            term_weights: id("term_weights"),
            user_embeddings: id("user_embeddings"),
            query: stack(Tower::Query.prefix()),
            ir_item: stack(Tower::IrItem.prefix()),
            rs_item: stack(Tower::RsItem.prefix()),
            retrieval: stack(MatchNet::Retrieval.prefix()),
            recommendation: stack(MatchNet::Recommendation.prefix()),
        };
        Ok(ModelParams {
            shape,
            params,
            layout,
        })
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn params(&self) -> &ParamSet<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<F> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet<F> {
        self.params
    }

    pub fn term_embeddings(&self) -> ParamId {
        self.layout.term_embeddings
    }

    pub fn term_weights(&self) -> ParamId {
        self.layout.term_weights
    }

    pub fn user_embeddings(&self) -> ParamId {
        self.layout.user_embeddings
    }

    pub fn tower(&self, tower: Tower) -> DenseStack {
        match tower {
            Tower::Query => self.layout.query,
            Tower::IrItem => self.layout.ir_item,
            Tower::RsItem => self.layout.rs_item,
        }
    }

    pub fn match_net(&self, net: MatchNet) -> DenseStack {
        match net {
            MatchNet::Retrieval => self.layout.retrieval,
            MatchNet::Recommendation => self.layout.recommendation,
        }
    }

    /// Parameters that only the recommendation path reads.
    pub fn recommendation_only(&self) -> Vec<ParamId> {
        let mut ids = vec![self.layout.user_embeddings];
        ids.extend(stack_ids(self.layout.rs_item));
        ids.extend(stack_ids(self.layout.recommendation));
        ids
    }

    /// Parameters that only the retrieval path reads.
    pub fn retrieval_only(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        ids.extend(stack_ids(self.layout.query));
        ids.extend(stack_ids(self.layout.ir_item));
        ids.extend(stack_ids(self.layout.retrieval));
        ids
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            shape: self.shape,
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }
}

fn stack_ids(s: DenseStack) -> [ParamId; 4] {
    [s.hidden_weight, s.hidden_bias, s.output_weight, s.output_bias]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape() -> ModelShape {
        ModelShape {
            vocab_size: 10,
            n_users: 3,
            embed_dim: 4,
            user_dim: 5,
            repr_dim: 6,
            tower_hidden: 7,
            match_hidden: 3,
        }
    }

    #[test]
    fn init_follows_layout() {
        let m = ModelParams::<f32>::init(shape(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(m.params().len(), 3 + 5 * 4);
        assert!(m.params().get(m.term_weights()).data().iter().all(|&w| w == 0.0));
        let e = m.params().get(m.term_embeddings());
        assert!(e.data().iter().all(|v| v.abs() <= 0.05));
        assert_eq!(m.params().get(m.tower(Tower::RsItem).output_weight).shape(), &[5, 7]);
        assert_eq!(m.params().get(m.match_net(MatchNet::Retrieval).hidden_weight).shape(), &[3, 6]);
    }

    #[test]
    fn mismatched_widths_cannot_be_instantiated() {
        let m = ModelParams::<f32>::init(shape(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut params = m.into_params();
        let id = params.id("rs_item_tower.output.weight").unwrap();
        *params.get_mut(id) = Tensor::zeros(&[4, 7]);
        assert!(matches!(
            ModelParams::from_params(shape(), params),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_width_is_a_config_error() {
        let s = ModelShape {
            repr_dim: 0,
            ..shape()
        };
        assert!(ModelParams::<f32>::init(s, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
