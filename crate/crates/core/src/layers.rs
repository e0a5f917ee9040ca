//! Affine layer used for output projections and the attention network.

use crate::scalar::Scalar;
use crate::tensor::{ParamGroup, Tensor};
use rand::Rng;

/// y = W x + b with gradient accumulation on the backward pass.
#[derive(Debug, Clone)]
pub struct Linear<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[output_dim, input_dim]),
            bias: Tensor::zeros(&[output_dim]),
        }
    }

    /// Weights from U(-bound, bound), bias zero.
    pub fn uniform<R: Rng>(input_dim: usize, output_dim: usize, bound: f64, rng: &mut R) -> Self {
        Linear {
            weight: Tensor::uniform(&[output_dim, input_dim], bound, rng),
            bias: Tensor::zeros(&[output_dim]),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &[F]) -> Vec<F> {
        let mut y = self.bias.values.clone();
        self.weight.matvec_add(x, &mut y);
        y
    }

    /// Accumulates dW and db from `dy`, returns dx.
    pub fn backward(&mut self, x: &[F], dy: &[F]) -> Vec<F> {
        self.weight.outer_add(dy, x);
        for (g, d) in self.bias.grad.iter_mut().zip(dy) {
            *g = *g + *d;
        }
        let mut dx = vec![F::zero(); self.input_dim()];
        self.weight.matvec_t_add(dy, &mut dx);
        dx
    }
}

impl<F: Scalar> ParamGroup<F> for Linear<F> {
    fn tensors(&self) -> Vec<(String, &Tensor<F>)> {
        vec![
            ("weight".to_string(), &self.weight),
            ("bias".to_string(), &self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        vec![
            ("weight".to_string(), &mut self.weight),
            ("bias".to_string(), &mut self.bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn forward_and_backward_match_hand_computation() {
        let mut lin = Linear::<f64>::zeros(2, 2);
        lin.weight.values = vec![1.0, 2.0, -1.0, 0.5];
        lin.bias.values = vec![0.1, -0.2];
        let y = lin.forward(&[2.0, -1.0]);
        assert_eq!(y, vec![1.0 * 2.0 + 2.0 * -1.0 + 0.1, -1.0 * 2.0 + 0.5 * -1.0 - 0.2]);

        let dx = lin.backward(&[2.0, -1.0], &[1.0, -1.0]);
        assert_abs_diff_eq!(dx[0], 1.0 * 1.0 + (-1.0) * (-1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(dx[1], 2.0 * 1.0 + 0.5 * (-1.0), epsilon = 1e-12);
        assert_eq!(lin.weight.grad, vec![2.0, -1.0, -2.0, 1.0]);
        assert_eq!(lin.bias.grad, vec![1.0, -1.0]);
    }
}
