use crate::numerics::{Gradients, ParamSet, Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for every parameter of a [`ParamSet`].
///
/// Parameters without a gradient entry are skipped entirely: their moments
/// and values stay as they are.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    config: AdamConfig,
    t: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &ParamSet<F>, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, _, t)| Tensor::zeros(t.shape()))
                .collect::<Vec<_>>()
        };
        AdamState {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, index: usize) -> &Tensor<F> {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &Tensor<F> {
        &self.v[index]
    }

    pub fn step(&mut self, params: &mut ParamSet<F>, grads: &Gradients<F>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: vec![params.len(), grads.len()],
                right: vec![self.m.len()],
            });
        }
        for id in params.ids() {
            if let Some(g) = grads.get(id) {
                let p = params.get(id);
                if g.shape() != p.shape() || self.m[id.index()].shape() != p.shape() {
                    return Err(Error::Dimension {
                        op: "adam_step",
                        left: p.shape().to_vec(),
                        right: g.shape().to_vec(),
                    });
                }
            }
        }

        self.t += 1;
        let c = self.config;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let (one_b1, one_b2) = (F::one() - b1, F::one() - b2);
        let bias1 = F::one() - b1.powi(self.t as i32);
        let bias2 = F::one() - b2.powi(self.t as i32);
        let lr = F::of(c.learning_rate);
        let eps = F::of(c.epsilon);

        for id in params.ids() {
            let Some(g) = grads.get(id) else { continue };
            let m = self.m[id.index()].data_mut();
            let v = self.v[id.index()].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                let gk = g.data()[k];
                m[k] = b1 * m[k] + one_b1 * gk;
                v[k] = b2 * v[k] + one_b2 * gk * gk;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
