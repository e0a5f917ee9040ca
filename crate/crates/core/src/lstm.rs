//! Single-layer LSTM cell with explicit backpropagation through time.

use crate::scalar::Scalar;
use crate::tensor::{ParamGroup, Tensor};
use rand::Rng;

/// Hidden and cell vectors after some step. A fresh state is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<F> {
    pub hidden: Vec<F>,
    pub cell: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(cells: usize) -> Self {
        LstmState {
            hidden: vec![F::zero(); cells],
            cell: vec![F::zero(); cells],
        }
    }
}

/// Weights of one LSTM layer. Gate blocks are stacked in the order
/// input, forget, candidate, output: `w` is `[4H, D]`, `u` is `[4H, H]`,
/// `b` is `[4H]`.
#[derive(Debug, Clone)]
pub struct LstmParams<F> {
    pub w: Tensor<F>,
    pub u: Tensor<F>,
    pub b: Tensor<F>,
    input_dim: usize,
    cells: usize,
}

/// Activations saved by [`LstmParams::step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache<F> {
    pub input: Vec<F>,
    pub h_prev: Vec<F>,
    pub c_prev: Vec<F>,
    i: Vec<F>,
    f: Vec<F>,
    g: Vec<F>,
    o: Vec<F>,
    tanh_c: Vec<F>,
}

/// Gradients flowing out of one backward step.
pub struct LstmStepGrads<F> {
    pub dinput: Vec<F>,
    pub dh_prev: Vec<F>,
    pub dc_prev: Vec<F>,
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Scalar> LstmParams<F> {
    pub fn zeros(input_dim: usize, cells: usize) -> Self {
        LstmParams {
            w: Tensor::zeros(&[4 * cells, input_dim]),
            u: Tensor::zeros(&[4 * cells, cells]),
            b: Tensor::zeros(&[4 * cells]),
            input_dim,
            cells,
        }
    }

    /// Weights from U(-bound, bound), biases zero.
    pub fn uniform<R: Rng>(input_dim: usize, cells: usize, bound: f64, rng: &mut R) -> Self {
        LstmParams {
            w: Tensor::uniform(&[4 * cells, input_dim], bound, rng),
            u: Tensor::uniform(&[4 * cells, cells], bound, rng),
            b: Tensor::zeros(&[4 * cells]),
            input_dim,
            cells,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// One forward step, returning the new state and the cache needed to
    /// backpropagate through this step later.
    pub fn step(&self, state: &LstmState<F>, input: &[F]) -> (LstmState<F>, LstmStepCache<F>) {
        let h = self.cells;
        debug_assert_eq!(input.len(), self.input_dim);
        debug_assert_eq!(state.hidden.len(), h);

        let mut z = self.b.values.clone();
        self.w.matvec_add(input, &mut z);
        self.u.matvec_add(&state.hidden, &mut z);

        let mut i = vec![F::zero(); h];
        let mut f = vec![F::zero(); h];
        let mut g = vec![F::zero(); h];
        let mut o = vec![F::zero(); h];
        for k in 0..h {
            i[k] = sigmoid(z[k]);
            f[k] = sigmoid(z[h + k]);
            g[k] = z[2 * h + k].tanh();
            o[k] = sigmoid(z[3 * h + k]);
        }

        let mut cell = vec![F::zero(); h];
        let mut tanh_c = vec![F::zero(); h];
        let mut hidden = vec![F::zero(); h];
        for k in 0..h {
            cell[k] = f[k] * state.cell[k] + i[k] * g[k];
            tanh_c[k] = cell[k].tanh();
            hidden[k] = o[k] * tanh_c[k];
        }

        let cache = LstmStepCache {
            input: input.to_vec(),
            h_prev: state.hidden.clone(),
            c_prev: state.cell.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (LstmState { hidden, cell }, cache)
    }

    /// Forward step without building a cache, for inference-only passes.
    pub fn step_light(&self, state: &LstmState<F>, input: &[F]) -> LstmState<F> {
        self.step(state, input).0
    }

    /// Backward through one step. `dh` and `dc` are the gradients of the loss
    /// with respect to this step's output hidden and cell vectors; gradients
    /// for `w`, `u`, `b` accumulate in place.
    pub fn backward(
        &mut self,
        cache: &LstmStepCache<F>,
        dh: &[F],
        dc: &[F],
    ) -> LstmStepGrads<F> {
        let h = self.cells;
        let one = F::one();

        let mut dz = vec![F::zero(); 4 * h];
        let mut dc_prev = vec![F::zero(); h];
        for k in 0..h {
            let do_ = dh[k] * cache.tanh_c[k];
            let dc_total = dc[k] + dh[k] * cache.o[k] * (one - cache.tanh_c[k] * cache.tanh_c[k]);
            let di = dc_total * cache.g[k];
            let df = dc_total * cache.c_prev[k];
            let dg = dc_total * cache.i[k];
            dc_prev[k] = dc_total * cache.f[k];

            dz[k] = di * cache.i[k] * (one - cache.i[k]);
            dz[h + k] = df * cache.f[k] * (one - cache.f[k]);
            dz[2 * h + k] = dg * (one - cache.g[k] * cache.g[k]);
            dz[3 * h + k] = do_ * cache.o[k] * (one - cache.o[k]);
        }

        self.w.outer_add(&dz, &cache.input);
        self.u.outer_add(&dz, &cache.h_prev);
        for (gb, d) in self.b.grad.iter_mut().zip(&dz) {
            *gb = *gb + *d;
        }

        let mut dinput = vec![F::zero(); self.input_dim];
        self.w.matvec_t_add(&dz, &mut dinput);
        let mut dh_prev = vec![F::zero(); h];
        self.u.matvec_t_add(&dz, &mut dh_prev);

        LstmStepGrads {
            dinput,
            dh_prev,
            dc_prev,
        }
    }
}

impl<F: Scalar> ParamGroup<F> for LstmParams<F> {
    fn tensors(&self) -> Vec<(String, &Tensor<F>)> {
        vec![
            ("w".to_string(), &self.w),
            ("u".to_string(), &self.u),
            ("b".to_string(), &self.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        vec![
            ("w".to_string(), &mut self.w),
            ("u".to_string(), &mut self.u),
            ("b".to_string(), &mut self.b),
        ]
    }
}
