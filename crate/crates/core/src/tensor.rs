//! Dense parameter tensors with paired gradient storage.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// A named parameter block: values plus an accumulated gradient of the same
/// shape. Rank 1 (`[len]`) and rank 2 (`[rows, cols]`, row-major) cover every
/// parameter in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    pub values: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![F::zero(); len],
            grad: vec![F::zero(); len],
        }
    }

    /// Values drawn i.i.d. from U(-bound, bound). Sampling happens in f64 so
    /// the draw sequence is identical across scalar types.
    pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(shape);
        for v in t.values.iter_mut() {
            *v = F::of(rng.gen_range(-bound..bound));
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            _ => self.shape[1],
        }
    }

    /// Row `r` of a rank-2 tensor as a slice.
    pub fn row(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    /// Adds `delta` into the gradient of row `r`.
    pub fn add_row_grad(&mut self, r: usize, delta: &[F]) {
        let c = self.cols();
        for (g, d) in self.grad[r * c..(r + 1) * c].iter_mut().zip(delta) {
            *g = *g + *d;
        }
    }

    /// y = W x for a rank-2 tensor W of shape [rows, cols], x of length cols.
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.cols());
        let (r, c) = (self.rows(), self.cols());
        let mut y = vec![F::zero(); r];
        for i in 0..r {
            let row = &self.values[i * c..(i + 1) * c];
            let mut acc = F::zero();
            for (w, xv) in row.iter().zip(x) {
                acc = acc + *w * *xv;
            }
            y[i] = acc;
        }
        y
    }

    /// y += W x, reusing an output buffer.
    pub fn matvec_add(&self, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(y.len(), self.rows());
        let c = self.cols();
        for (i, out) in y.iter_mut().enumerate() {
            let row = &self.values[i * c..(i + 1) * c];
            let mut acc = F::zero();
            for (w, xv) in row.iter().zip(x) {
                acc = acc + *w * *xv;
            }
            *out = *out + acc;
        }
    }

    /// dx += W^T dy.
    pub fn matvec_t_add(&self, dy: &[F], dx: &mut [F]) {
        debug_assert_eq!(dy.len(), self.rows());
        debug_assert_eq!(dx.len(), self.cols());
        let c = self.cols();
        for (i, dyi) in dy.iter().enumerate() {
            let row = &self.values[i * c..(i + 1) * c];
            for (dxj, w) in dx.iter_mut().zip(row) {
                *dxj = *dxj + *w * *dyi;
            }
        }
    }

    /// grad += dy x^T (outer product accumulation for y = W x).
    pub fn outer_add(&mut self, dy: &[F], x: &[F]) {
        debug_assert_eq!(dy.len(), self.rows());
        debug_assert_eq!(x.len(), self.cols());
        let c = self.cols();
        for (i, dyi) in dy.iter().enumerate() {
            let grow = &mut self.grad[i * c..(i + 1) * c];
            for (g, xv) in grow.iter_mut().zip(x) {
                *g = *g + *dyi * *xv;
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.iter_mut() {
            *g = F::zero();
        }
    }

    pub fn grad_norm_sq(&self) -> F {
        self.grad.iter().map(|g| *g * *g).sum()
    }

    pub fn values_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A collection of named tensors. Implemented by every parameter struct so
/// the optimizer, checkpointing and gradient checking can walk parameters
/// uniformly. Names are stable paths like `reader.w`.
pub trait ParamGroup<F: Scalar> {
    fn tensors(&self) -> Vec<(String, &Tensor<F>)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)>;

    fn zero_grads(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Global L2 norm of all gradients.
    fn grad_norm(&self) -> F {
        let sq: F = self.tensors().iter().map(|(_, t)| t.grad_norm_sq()).sum();
        sq.sqrt()
    }

    fn scale_grads(&mut self, factor: F) {
        for (_, t) in self.tensors_mut() {
            for g in t.grad.iter_mut() {
                *g = *g * factor;
            }
        }
    }

    /// Flattened copy of every gradient, in tensor order.
    fn flat_grads(&self) -> Vec<F> {
        let mut out = Vec::new();
        for (_, t) in self.tensors() {
            out.extend_from_slice(&t.grad);
        }
        out
    }

    fn check_values_finite(&self, context: &str) -> Result<()> {
        for (name, t) in self.tensors() {
            if !t.values_finite() {
                return Err(Error::NonFinite(format!("{context}: tensor {name}")));
            }
        }
        Ok(())
    }
}

/// Prefixes every tensor name of `inner` with `prefix.`, for nesting groups.
pub fn with_prefix<'a, F: Scalar>(
    prefix: &str,
    items: Vec<(String, &'a Tensor<F>)>,
) -> Vec<(String, &'a Tensor<F>)> {
    items
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}

pub fn with_prefix_mut<'a, F: Scalar>(
    prefix: &str,
    items: Vec<(String, &'a mut Tensor<F>)>,
) -> Vec<(String, &'a mut Tensor<F>)> {
    items
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matvec_matches_hand_computation() {
        let mut w = Tensor::<f64>::zeros(&[2, 3]);
        w.values = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = w.matvec(&[1.0, 0.5, -1.0]);
        assert_eq!(y, vec![1.0 + 1.0 - 3.0, 4.0 + 2.5 - 6.0]);
    }

    #[test]
    fn transpose_matvec_matches_hand_computation() {
        let mut w = Tensor::<f64>::zeros(&[2, 3]);
        w.values = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut dx = vec![0.0; 3];
        w.matvec_t_add(&[1.0, -1.0], &mut dx);
        assert_eq!(dx, vec![1.0 - 4.0, 2.0 - 5.0, 3.0 - 6.0]);
    }

    #[test]
    fn uniform_init_within_bound_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = Tensor::<f64>::uniform(&[4, 4], 0.05, &mut rng);
        assert!(t.values.iter().all(|v| v.abs() < 0.05));
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let t2 = Tensor::<f64>::uniform(&[4, 4], 0.05, &mut rng2);
        assert_eq!(t.values, t2.values);
    }

    #[test]
    fn f32_and_f64_draw_identical_sequences() {
        let mut ra = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor::<f32>::uniform(&[3, 3], 0.05, &mut ra);
        let mut rb = ChaCha8Rng::seed_from_u64(3);
        let b = Tensor::<f64>::uniform(&[3, 3], 0.05, &mut rb);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((f64::from(*x) - *y).abs() < 1e-7);
        }
    }
}
