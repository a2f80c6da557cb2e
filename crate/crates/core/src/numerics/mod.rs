//! Dense tensors with reverse-mode gradients and the Adam optimizer.
//!
//! Everything the model computes goes through [`Tape`]: each primitive
//! records its inputs and whatever it needs for the backward pass, and
//! [`Tape::backward`] replays the record in reverse. Parameters live in a
//! [`ParamSet`] that the tape borrows, so a forward pass never copies the
//! embedding tables.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast};

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_difference_check, GradCheckReport, GroupError};
pub use tape::{Tape, Var};
pub use tensor::{Gradients, ParamId, ParamSet, Tensor};

/// Floating point element type. `f32` for training, `f64` for verification.
pub trait Scalar:
    Float
    + FromPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Width in bytes of the little-endian encoding.
    const BYTES: usize;

    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    fn write_le(self, out: &mut Vec<u8>);

    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// Overflow-safe logistic function.
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus<F: Scalar>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// Pairwise logistic loss `-ln σ(pos - neg)` for a single pair.
pub fn pair_logistic_loss<F: Scalar>(pos: F, neg: F) -> crate::Result<F> {
    if !pos.is_finite() || !neg.is_finite() {
        return Err(crate::Error::Numeric(format!(
            "pair loss scores must be finite, got ({pos}, {neg})"
        )));
    }
    Ok(softplus(neg - pos))
}

/// Softmax normalisation of raw weights, with max subtraction.
pub fn softmax_weights<F: Scalar>(raw: &[F]) -> crate::Result<Vec<F>> {
    if raw.is_empty() {
        return Err(crate::Error::Parameter(
            "softmax over an empty weight vector".into(),
        ));
    }
    let mut out = vec![F::zero(); raw.len()];
    tape::softmax_into(raw, &mut out);
    Ok(out)
}
