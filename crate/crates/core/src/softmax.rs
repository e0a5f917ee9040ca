//! Numerically stable softmax cross-entropy.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Log-softmax via the log-sum-exp trick. Safe for large-magnitude logits.
pub fn log_softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| *l - lse).collect()
}

pub fn log_sum_exp<F: Scalar>(logits: &[F]) -> F {
    let m = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let sum: F = logits.iter().map(|l| (*l - m).exp()).sum();
    m + sum.ln()
}

/// Cross-entropy of the softmax distribution against a one-hot target.
///
/// Returns `(loss, dlogits)` where `loss = -log softmax(logits)[target]` and
/// `dlogits = softmax(logits) - onehot(target)`, the gradient of the loss
/// with respect to the logits.
pub fn softmax_xent<F: Scalar>(logits: &[F], target: usize) -> Result<(F, Vec<F>)> {
    if target >= logits.len() {
        return Err(Error::Dimension {
            context: "softmax_xent target",
            expected: logits.len(),
            actual: target,
        });
    }
    let lse = log_sum_exp(logits);
    let loss = lse - logits[target];
    let mut dlogits: Vec<F> = logits.iter().map(|l| (*l - lse).exp()).collect();
    dlogits[target] = dlogits[target] - F::one();
    Ok((loss, dlogits))
}

/// Forward-only negative log probability of `target` under softmax(logits).
pub fn nll_of<F: Scalar>(logits: &[F], target: usize) -> F {
    log_sum_exp(logits) - logits[target]
}
