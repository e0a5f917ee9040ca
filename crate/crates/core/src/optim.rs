//! Plain SGD with global gradient-norm clipping.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::ParamGroup;

#[derive(Debug, Clone, Copy)]
pub struct SgdConfig<F> {
    pub lr: F,
    /// Global L2 clip threshold; `None` disables clipping.
    pub clip_norm: Option<F>,
}

/// One descent step: clip, subtract `lr * grad`, then clear gradients.
///
/// With `lr == 0` the values are left bitwise unchanged (no `v - 0*g`
/// arithmetic that could flip signed zeros); gradients are still cleared.
/// Non-finite values after the update are reported as an error so training
/// divergence surfaces with a named tensor.
pub fn sgd_step<F: Scalar, P: ParamGroup<F> + ?Sized>(
    params: &mut P,
    cfg: &SgdConfig<F>,
) -> Result<()> {
    if cfg.lr != F::zero() {
        let mut scale = F::one();
        if let Some(clip) = cfg.clip_norm {
            let norm = params.grad_norm();
            if norm > clip {
                scale = clip / norm;
            }
        }
        let step = cfg.lr * scale;
        for (_, t) in params.tensors_mut() {
            for (v, g) in t.values.iter_mut().zip(&t.grad) {
                *v = *v - step * *g;
            }
        }
        params.check_values_finite("sgd_step")?;
    }
    params.zero_grads();
    Ok(())
}
