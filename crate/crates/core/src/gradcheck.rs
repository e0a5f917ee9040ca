//! Gradient verification by central finite differences.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ParamGroup;

/// Outcome of a gradient check. `max_rel_error` is the worst relative
/// discrepancy seen; `worst` names the offending tensor and flat coordinate.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: (String, usize),
    pub checked: usize,
}

/// Compares analytic gradients (already accumulated in `params.grad`) with
/// central finite differences of `loss`, coordinate by coordinate.
///
/// The relative error for a coordinate is
/// `|fd - analytic| / max(|fd|, |analytic|, floor)`; the floor keeps
/// near-zero gradients from inflating the ratio with pure roundoff.
/// `loss` must be a deterministic pure function of the parameter values.
pub fn grad_check<F, P, L>(
    params: &mut P,
    mut loss: L,
    eps: f64,
    floor: f64,
) -> Result<GradCheckReport>
where
    F: Scalar,
    P: ParamGroup<F>,
    L: FnMut(&P) -> F,
{
    let analytic = params.flat_grads();
    let n_tensors = params.tensors().len();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
    };
    let mut flat = 0usize;
    for t in 0..n_tensors {
        let (name, len) = {
            let ts = params.tensors();
            (ts[t].0.clone(), ts[t].1.len())
        };
        for k in 0..len {
            let orig = params.tensors()[t].1.values[k];
            let orig_f64 = orig.to_f64_lossy();

            params.tensors_mut()[t].1.values[k] = F::of(orig_f64 + eps);
            let up = loss(params).to_f64_lossy();
            params.tensors_mut()[t].1.values[k] = F::of(orig_f64 - eps);
            let down = loss(params).to_f64_lossy();
            params.tensors_mut()[t].1.values[k] = orig;

            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "grad_check loss at {name}[{k}]"
                )));
            }
            let fd = (up - down) / (2.0 * eps);
            let an = analytic[flat].to_f64_lossy();
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (name.clone(), k);
            }
            report.checked += 1;
            flat += 1;
        }
    }
    Ok(report)
}
