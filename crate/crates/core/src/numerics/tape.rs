use rand::Rng;

use crate::numerics::{sigmoid, softplus, Gradients, ParamId, ParamSet, Scalar, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<F> {
    Param(ParamId),
    Constant,
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SegmentSoftmax {
        input: Var,
        offsets: Vec<usize>,
    },
    SegmentWeightedSum {
        weights: Var,
        rows: Var,
        offsets: Vec<usize>,
    },
    Linear {
        x: Var,
        weight: Var,
        bias: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    Dropout {
        input: Var,
        mask: Vec<F>,
    },
    Mul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    PairLogistic {
        pos: Var,
        neg: Var,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node<F> {
    op: Op<F>,
    shape: Vec<usize>,
    value: Option<Tensor<F>>,
}

/// Record of a forward pass over a borrowed parameter set.
///
/// Ops are appended in execution order; [`Tape::backward`] walks them in
/// exact reverse. Every op checks its output for NaN/Inf.
pub struct Tape<'p, F: Scalar> {
    params: &'p ParamSet<F>,
    nodes: Vec<Node<F>>,
    param_vars: Vec<Option<Var>>,
}

impl<'p, F: Scalar> Tape<'p, F> {
    pub fn new(params: &'p ParamSet<F>) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamSet<F> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.params.get(*id),
            (_, Some(t)) => t,
            (_, None) => unreachable!("non-parameter node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Scalar value of a single-element node.
    pub fn item(&self, v: Var) -> F {
        self.value(v).data()[0]
    }

    fn push(&mut self, op: Op<F>, value: Tensor<F>, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::Numeric(format!("{name} produced a non-finite value")));
        }
        self.nodes.push(Node {
            op,
            shape: value.shape().to_vec(),
            value: Some(value),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Leaf for a trainable parameter. Repeated calls return the same var.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let shape = self.params.get(id).shape().to_vec();
        self.nodes.push(Node {
            op: Op::Param(id),
            shape,
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Result<Var> {
        self.push(Op::Constant, value, "constant")
    }

    /// Rows of `table` at `ids`. A vector table yields a vector.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let rows = t.rows();
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::Lookup(format!(
                "row {bad} out of range for table with {rows} rows"
            )));
        }
        if ids.is_empty() {
            return Err(Error::Parameter("gather with no indices".into()));
        }
        let w = t.row_len();
        let mut data = Vec::with_capacity(ids.len() * w);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let mut shape = t.shape().to_vec();
        shape[0] = ids.len();
        let out = Tensor::new(shape, data)?;
        self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            out,
            "gather",
        )
    }

    /// Softmax over contiguous segments of a vector. `offsets` has one more
    /// entry than there are segments and ends at the vector length.
    pub fn segment_softmax(&mut self, input: Var, offsets: &[usize]) -> Result<Var> {
        let x = self.value(input);
        check_offsets(offsets, x.len())?;
        let mut out = vec![F::zero(); x.len()];
        for seg in offsets.windows(2) {
            softmax_into(&x.data()[seg[0]..seg[1]], &mut out[seg[0]..seg[1]]);
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        self.push(
            Op::SegmentSoftmax {
                input,
                offsets: offsets.to_vec(),
            },
            out,
            "segment_softmax",
        )
    }

    /// Softmax normalisation of one weight vector.
    pub fn softmax_weights(&mut self, raw: Var) -> Result<Var> {
        let n = self.value(raw).len();
        self.segment_softmax(raw, &[0, n])
    }

    /// `out[s] = Σ_{k in segment s} weights[k] · rows[k]`.
    pub fn segment_weighted_sum(
        &mut self,
        weights: Var,
        rows: Var,
        offsets: &[usize],
    ) -> Result<Var> {
        let w = self.value(weights);
        let r = self.value(rows);
        if w.len() != r.rows() {
            return Err(Error::Dimension {
                op: "segment_weighted_sum",
                left: w.shape().to_vec(),
                right: r.shape().to_vec(),
            });
        }
        check_offsets(offsets, w.len())?;
        let d = r.row_len();
        let n_seg = offsets.len() - 1;
        let mut out = vec![F::zero(); n_seg * d];
        for (s, seg) in offsets.windows(2).enumerate() {
            let dst = &mut out[s * d..(s + 1) * d];
            for k in seg[0]..seg[1] {
                axpy(w.data()[k], r.row(k), dst);
            }
        }
        let out = Tensor::new(vec![n_seg, d], out)?;
        self.push(
            Op::SegmentWeightedSum {
                weights,
                rows,
                offsets: offsets.to_vec(),
            },
            out,
            "segment_weighted_sum",
        )
    }

    /// Affine map `x · weightᵀ + bias`. `x` is `[n_in]` or `[batch, n_in]`,
    /// `weight` is `[n_out, n_in]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(weight);
        let bv = self.value(bias);
        let dim_err = || Error::Dimension {
            op: "linear",
            left: xv.shape().to_vec(),
            right: wv.shape().to_vec(),
        };
        if wv.shape().len() != 2 || xv.shape().len() > 2 {
            return Err(dim_err());
        }
        let (n_out, n_in) = (wv.shape()[0], wv.shape()[1]);
        let n_in_x = *xv.shape().last().expect("non-empty shape");
        if n_in_x != n_in {
            return Err(dim_err());
        }
        if bv.shape() != [n_out] {
            return Err(Error::Dimension {
                op: "linear bias",
                left: bv.shape().to_vec(),
                right: vec![n_out],
            });
        }
        let batch = xv.len() / n_in;
        let mut out = Vec::with_capacity(batch * n_out);
        for b in 0..batch {
            let xr = &xv.data()[b * n_in..(b + 1) * n_in];
            for j in 0..n_out {
                out.push(dot(wv.row(j), xr) + bv.data()[j]);
            }
        }
        let shape = if xv.shape().len() == 1 {
            vec![n_out]
        } else {
            vec![batch, n_out]
        };
        let out = Tensor::new(shape, out)?;
        self.push(Op::Linear { x, weight, bias }, out, "linear")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().map(|&a| a.max(F::zero())).collect(),
        )?;
        self.push(Op::Relu(x), out, "relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().map(|&a| sigmoid(a)).collect(),
        )?;
        self.push(Op::Sigmoid(x), out, "sigmoid")
    }

    /// Inverted dropout: kept units are scaled by `1 / keep_prob` so the
    /// evaluation pass is an identity.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        keep_prob: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::Parameter(format!(
                "dropout keep probability must be in (0, 1], got {keep_prob}"
            )));
        }
        if !training || keep_prob == 1.0 {
            return Ok(x);
        }
        let v = self.value(x);
        let scale = F::of(1.0 / keep_prob);
        let mask: Vec<F> = (0..v.len())
            .map(|_| {
                if rng.random::<f64>() < keep_prob {
                    scale
                } else {
                    F::zero()
                }
            })
            .collect();
        let out = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect(),
        )?;
        self.push(Op::Dropout { input: x, mask }, out, "dropout")
    }

    fn elementwise(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(F, F) -> F,
        op: Op<F>,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Dimension {
                op: name,
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push(op, out, name)
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Mean over pairs of `-ln σ(pos - neg)`, as a single-element tensor.
    pub fn pair_logistic_loss(&mut self, pos: Var, neg: Var) -> Result<Var> {
        let (pv, nv) = (self.value(pos), self.value(neg));
        if pv.len() != nv.len() || pv.is_empty() {
            return Err(Error::Dimension {
                op: "pair_logistic_loss",
                left: pv.shape().to_vec(),
                right: nv.shape().to_vec(),
            });
        }
        let n = F::of(pv.len() as f64);
        let mut total = F::zero();
        for (&p, &q) in pv.data().iter().zip(nv.data()) {
            total += softplus(q - p);
        }
        self.push(
            Op::PairLogistic { pos, neg },
            Tensor::scalar(total / n),
            "pair_logistic_loss",
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.value(x).data().iter().copied().sum();
        self.push(Op::Sum(x), Tensor::scalar(total), "sum")
    }

    /// Reverse pass from a single-element `loss`.
    ///
    /// Every parameter that appears on the tape gets an entry in the result,
    /// zero if no path connects it to `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Dimension {
                op: "backward",
                left: self.shape(loss).to_vec(),
                right: vec![1],
            });
        }
        let mut grads: Vec<Option<Vec<F>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![F::one()]);
        let mut out = Gradients::empty(self.params.len());

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some(g) = grads[i].take() else {
                if let Op::Param(id) = node.op {
                    out.touch(id, &node.shape);
                }
                continue;
            };
            match &node.op {
                Op::Param(id) => out.accumulate(*id, &node.shape, &g),
                Op::Constant => {}
                Op::Gather { table, ids } => {
                    let t = self.value(*table);
                    let w = t.row_len();
                    let dst = slot(&mut grads, *table, t.len());
                    for (k, &row) in ids.iter().enumerate() {
                        add_into(&mut dst[row * w..(row + 1) * w], &g[k * w..(k + 1) * w]);
                    }
                }
                Op::SegmentSoftmax { input, offsets } => {
                    let y = node.value.as_ref().expect("value").data();
                    let dst = slot(&mut grads, *input, y.len());
                    for seg in offsets.windows(2) {
                        let r = seg[0]..seg[1];
                        let inner = dot(&y[r.clone()], &g[r.clone()]);
                        for k in r {
                            dst[k] += y[k] * (g[k] - inner);
                        }
                    }
                }
                Op::SegmentWeightedSum {
                    weights,
                    rows,
                    offsets,
                } => {
                    let wv = self.value(*weights);
                    let rv = self.value(*rows);
                    let d = rv.row_len();
                    let mut gw = vec![F::zero(); wv.len()];
                    let mut gr = vec![F::zero(); rv.len()];
                    for (s, seg) in offsets.windows(2).enumerate() {
                        let gs = &g[s * d..(s + 1) * d];
                        for k in seg[0]..seg[1] {
                            gw[k] = dot(gs, rv.row(k));
                            axpy(wv.data()[k], gs, &mut gr[k * d..(k + 1) * d]);
                        }
                    }
                    add_into(slot(&mut grads, *weights, wv.len()), &gw);
                    add_into(slot(&mut grads, *rows, rv.len()), &gr);
                }
                Op::Linear { x, weight, bias } => {
                    let xv = self.value(*x);
                    let wv = self.value(*weight);
                    let (n_out, n_in) = (wv.shape()[0], wv.shape()[1]);
                    let batch = xv.len() / n_in;
                    let mut gx = vec![F::zero(); xv.len()];
                    let mut gw = vec![F::zero(); wv.len()];
                    let mut gb = vec![F::zero(); n_out];
                    for b in 0..batch {
                        let xr = &xv.data()[b * n_in..(b + 1) * n_in];
                        let gxr = &mut gx[b * n_in..(b + 1) * n_in];
                        for j in 0..n_out {
                            let gj = g[b * n_out + j];
                            if gj == F::zero() {
                                continue;
                            }
                            gb[j] += gj;
                            axpy(gj, wv.row(j), gxr);
                            axpy(gj, xr, &mut gw[j * n_in..(j + 1) * n_in]);
                        }
                    }
                    add_into(slot(&mut grads, *x, xv.len()), &gx);
                    add_into(slot(&mut grads, *weight, wv.len()), &gw);
                    add_into(slot(&mut grads, *bias, n_out), &gb);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x).data();
                    let dst = slot(&mut grads, *x, xv.len());
                    for k in 0..xv.len() {
                        if xv[k] > F::zero() {
                            dst[k] += g[k];
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref().expect("value").data();
                    let dst = slot(&mut grads, *x, y.len());
                    for k in 0..y.len() {
                        dst[k] += g[k] * y[k] * (F::one() - y[k]);
                    }
                }
                Op::Dropout { input, mask } => {
                    let dst = slot(&mut grads, *input, mask.len());
                    for k in 0..mask.len() {
                        dst[k] += g[k] * mask[k];
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let ga: Vec<F> = g.iter().zip(bv).map(|(&x, &y)| x * y).collect();
                    let gb: Vec<F> = g.iter().zip(av).map(|(&x, &y)| x * y).collect();
                    add_into(slot(&mut grads, *a, ga.len()), &ga);
                    add_into(slot(&mut grads, *b, gb.len()), &gb);
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    add_into(slot(&mut grads, *b, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    let dst = slot(&mut grads, *b, g.len());
                    for k in 0..g.len() {
                        dst[k] -= g[k];
                    }
                }
                Op::PairLogistic { pos, neg } => {
                    let (pv, nv) = (self.value(*pos).data(), self.value(*neg).data());
                    let n = F::of(pv.len() as f64);
                    // d/dpos softplus(neg - pos) = -σ(neg - pos)
                    let coef: Vec<F> = pv
                        .iter()
                        .zip(nv)
                        .map(|(&p, &q)| g[0] * sigmoid(q - p) / n)
                        .collect();
                    let dp = slot(&mut grads, *pos, pv.len());
                    for k in 0..coef.len() {
                        dp[k] -= coef[k];
                    }
                    let dn = slot(&mut grads, *neg, nv.len());
                    for k in 0..coef.len() {
                        dn[k] += coef[k];
                    }
                }
                Op::Sum(x) => {
                    let n = self.value(*x).len();
                    let dst = slot(&mut grads, *x, n);
                    for v in dst.iter_mut() {
                        *v += g[0];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn slot<F: Scalar>(grads: &mut [Option<Vec<F>>], v: Var, len: usize) -> &mut [F] {
    grads[v.0].get_or_insert_with(|| vec![F::zero(); len])
}

fn check_offsets(offsets: &[usize], len: usize) -> Result<()> {
    let ok = offsets.len() >= 2
        && offsets[0] == 0
        && *offsets.last().expect("len >= 2") == len
        && offsets.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "segment offsets must be strictly increasing from 0 to {len}, got {offsets:?}"
        )))
    }
}

pub(crate) fn softmax_into<F: Scalar>(raw: &[F], out: &mut [F]) {
    let max = raw.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for (o, &r) in out.iter_mut().zip(raw) {
        *o = (r - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn add_into<F: Scalar>(dst: &mut [F], src: &[F]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
