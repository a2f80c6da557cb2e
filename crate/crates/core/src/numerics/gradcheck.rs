use crate::numerics::{Gradients, ParamSet};
use crate::{Error, Result};

/// Worst relative error found in one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < self.tolerance)
    }
}

/// Gradients smaller than this are compared on an absolute scale.
const MAGNITUDE_FLOOR: f64 = 1e-5;

/// Compare tape gradients against central differences
/// `(f(θ+h) − f(θ−h)) / 2h`, element by element.
///
/// `loss_fn` must be deterministic (no dropout, fixed batch). It is
/// evaluated twice at the starting point and a mismatch is reported as a
/// verification error. Relative error is `|a − n| / max(|a|, |n|, 1e-5)`.
pub fn finite_difference_check<L>(
    loss_fn: L,
    params: &ParamSet<f64>,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    L: Fn(&ParamSet<f64>) -> Result<(f64, Gradients<f64>)>,
{
    if params.is_empty() {
        return Ok(GradCheckReport {
            groups: Vec::new(),
            tolerance: tol,
        });
    }
    let (f0, grads) = loss_fn(params)?;
    let (f1, _) = loss_fn(params)?;
    if f0.to_bits() != f1.to_bits() {
        return Err(Error::Verification(format!(
            "loss function is not deterministic: {f0} vs {f1}"
        )));
    }

    let mut probe = params.clone();
    let mut groups = Vec::new();
    for (id, name, tensor) in params.iter() {
        let analytic = grads.get(id);
        let mut worst = 0.0f64;
        for k in 0..tensor.len() {
            let original = tensor.data()[k];
            probe.get_mut(id).data_mut()[k] = original + h;
            let (plus, _) = loss_fn(&probe)?;
            probe.get_mut(id).data_mut()[k] = original - h;
            let (minus, _) = loss_fn(&probe)?;
            probe.get_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.map_or(0.0, |g| g.data()[k]);
            let denom = a.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
        groups.push(GroupError {
            name: name.to_string(),
            max_rel_error: worst,
            checked: tensor.len(),
        });
    }
    Ok(GradCheckReport {
        groups,
        tolerance: tol,
    })
}
