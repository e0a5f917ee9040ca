//! Learned value baseline for attention training.
//!
//! A bidirectional LSTM reads the (frozen) word embeddings of the sequence;
//! a forward combiner LSTM then consumes, at position i, the bidirectional
//! summary of position i together with the previous fixation decision
//! omega_{i-1} (zero at i = 1). A linear head maps each combiner state to a
//! scalar estimate U_i of the episode cost. U_i therefore sees the whole
//! word sequence but only the decisions made before position i, matching
//! what the attention module knows when it decides.

use crate::error::{Error, Result};
use crate::layers::Linear;
use crate::lstm::{LstmParams, LstmState, LstmStepCache};
use crate::model::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::{with_prefix, with_prefix_mut, ParamGroup, Tensor};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct ValueParams<F> {
    pub fwd: LstmParams<F>,
    pub bwd: LstmParams<F>,
    pub comb: LstmParams<F>,
    pub head: Linear<F>,
}

/// Forward-pass caches; indices are 0-based positions.
pub struct ValueRun<F> {
    pub estimates: Vec<F>,
    fwd_steps: Vec<LstmStepCache<F>>,
    bwd_steps: Vec<LstmStepCache<F>>,
    comb_steps: Vec<LstmStepCache<F>>,
    comb_states: Vec<LstmState<F>>,
}

impl<F: Scalar> ValueParams<F> {
    pub fn init<R: Rng>(config: &ModelConfig, bound: f64, rng: &mut R) -> Self {
        let d = config.embedding_dim;
        let h = config.value_cells;
        ValueParams {
            fwd: LstmParams::uniform(d, h, bound, rng),
            bwd: LstmParams::uniform(d, h, bound, rng),
            comb: LstmParams::uniform(2 * h + 1, h, bound, rng),
            head: Linear::uniform(h, 1, bound, rng),
        }
    }

    /// Per-position cost estimates for `seq` under `omega`. `embeddings`
    /// is the model's table, treated as a constant input.
    pub fn forward(
        &self,
        embeddings: &Tensor<F>,
        seq: &[u32],
        omega: &[bool],
    ) -> Result<ValueRun<F>> {
        let n = seq.len();
        if n == 0 {
            return Err(Error::Empty("value estimator sequence"));
        }
        if omega.len() != n {
            return Err(Error::Dimension {
                context: "value estimator mask length",
                expected: n,
                actual: omega.len(),
            });
        }
        let h = self.fwd.cells();

        let mut fwd_steps = Vec::with_capacity(n);
        let mut fwd_hidden: Vec<Vec<F>> = Vec::with_capacity(n);
        let mut state = LstmState::zeros(h);
        for &w in seq {
            let (next, cache) = self.fwd.step(&state, embeddings.row(w as usize));
            fwd_steps.push(cache);
            fwd_hidden.push(next.hidden.clone());
            state = next;
        }

        let mut bwd_steps: Vec<Option<LstmStepCache<F>>> = (0..n).map(|_| None).collect();
        let mut bwd_hidden: Vec<Vec<F>> = vec![Vec::new(); n];
        let mut state = LstmState::zeros(h);
        for i in (0..n).rev() {
            let (next, cache) = self.bwd.step(&state, embeddings.row(seq[i] as usize));
            bwd_steps[i] = Some(cache);
            bwd_hidden[i] = next.hidden.clone();
            state = next;
        }
        let bwd_steps: Vec<LstmStepCache<F>> =
            bwd_steps.into_iter().map(|c| c.unwrap()).collect();

        let mut comb_steps = Vec::with_capacity(n);
        let mut comb_states = Vec::with_capacity(n);
        let mut estimates = Vec::with_capacity(n);
        let mut state = LstmState::zeros(h);
        for i in 0..n {
            let mut input = Vec::with_capacity(2 * h + 1);
            input.extend_from_slice(&fwd_hidden[i]);
            input.extend_from_slice(&bwd_hidden[i]);
            input.push(if i > 0 && omega[i - 1] {
                F::one()
            } else {
                F::zero()
            });
            let (next, cache) = self.comb.step(&state, &input);
            estimates.push(self.head.forward(&next.hidden)[0]);
            comb_steps.push(cache);
            comb_states.push(next.clone());
            state = next;
        }

        Ok(ValueRun {
            estimates,
            fwd_steps,
            bwd_steps,
            comb_steps,
            comb_states,
        })
    }

    /// Accumulates gradients given dL/dU_i per position. Embeddings are
    /// frozen inputs: their gradient is discarded.
    pub fn backward(&mut self, run: &ValueRun<F>, d_est: &[F]) {
        let n = run.estimates.len();
        debug_assert_eq!(d_est.len(), n);
        let h = self.fwd.cells();

        let mut dfwd_h = vec![vec![F::zero(); h]; n];
        let mut dbwd_h = vec![vec![F::zero(); h]; n];

        // Combiner backward (right to left), splitting input gradients into
        // the bidirectional summaries.
        let mut dh = vec![F::zero(); h];
        let mut dc = vec![F::zero(); h];
        for i in (0..n).rev() {
            let dh_out = self
                .head
                .backward(&run.comb_states[i].hidden, &[d_est[i]]);
            for (a, b) in dh.iter_mut().zip(&dh_out) {
                *a = *a + *b;
            }
            let grads = self.comb.backward(&run.comb_steps[i], &dh, &dc);
            dfwd_h[i].copy_from_slice(&grads.dinput[..h]);
            dbwd_h[i].copy_from_slice(&grads.dinput[h..2 * h]);
            dh = grads.dh_prev;
            dc = grads.dc_prev;
        }

        // Forward-direction LSTM backward.
        let mut dh = vec![F::zero(); h];
        let mut dc = vec![F::zero(); h];
        for i in (0..n).rev() {
            for (a, b) in dh.iter_mut().zip(&dfwd_h[i]) {
                *a = *a + *b;
            }
            let grads = self.fwd.backward(&run.fwd_steps[i], &dh, &dc);
            dh = grads.dh_prev;
            dc = grads.dc_prev;
        }

        // Backward-direction LSTM: scan order was right to left, so its
        // backward pass runs left to right.
        let mut dh = vec![F::zero(); h];
        let mut dc = vec![F::zero(); h];
        for i in 0..n {
            for (a, b) in dh.iter_mut().zip(&dbwd_h[i]) {
                *a = *a + *b;
            }
            let grads = self.bwd.backward(&run.bwd_steps[i], &dh, &dc);
            dh = grads.dh_prev;
            dc = grads.dc_prev;
        }
    }
}

impl<F: Scalar> ParamGroup<F> for ValueParams<F> {
    fn tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut v = with_prefix("fwd", self.fwd.tensors());
        v.extend(with_prefix("bwd", self.bwd.tensors()));
        v.extend(with_prefix("comb", self.comb.tensors()));
        v.extend(with_prefix("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut v = with_prefix_mut("fwd", self.fwd.tensors_mut());
        v.extend(with_prefix_mut("bwd", self.bwd.tensors_mut()));
        v.extend(with_prefix_mut("comb", self.comb.tensors_mut()));
        v.extend(with_prefix_mut("head", self.head.tensors_mut()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Tensor<f64>, ValueParams<f64>, Vec<u32>, Vec<bool>) {
        let config = ModelConfig::tiny_for_tests();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let emb = Tensor::uniform(&[config.vocab_size, config.embedding_dim], 0.5, &mut rng);
        let value = ValueParams::init(&config, 0.4, &mut rng);
        (emb, value, vec![3, 7, 1, 0, 9], vec![true, false, false, true, true])
    }

    /// U_i may depend on every word but only on decisions before i.
    #[test]
    fn estimates_are_causal_in_decisions_and_global_in_words() {
        let (emb, value, seq, omega) = setup();
        let base = value.forward(&emb, &seq, &omega).unwrap();

        // Flip a later decision: estimates up to that position unchanged.
        let mut flipped = omega.clone();
        flipped[3] = !flipped[3];
        let run = value.forward(&emb, &seq, &flipped).unwrap();
        for i in 0..=3 {
            assert_eq!(base.estimates[i], run.estimates[i], "position {i}");
        }
        assert_ne!(base.estimates[4], run.estimates[4]);

        // Change a later word: even the first estimate moves (the
        // bidirectional pass saw it).
        let mut other = seq.clone();
        other[4] = 2;
        let run = value.forward(&emb, &other, &omega).unwrap();
        assert_ne!(base.estimates[0], run.estimates[0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (emb, mut value, seq, omega) = setup();
        let targets = [4.0, 3.5, 2.0, 6.0, 1.0];
        let loss_fn = |v: &ValueParams<f64>| -> f64 {
            let run = v.forward(&emb, &seq, &omega).unwrap();
            run.estimates
                .iter()
                .zip(&targets)
                .map(|(u, c)| 0.5 * (u - c) * (u - c))
                .sum()
        };

        value.zero_grads();
        let run = value.forward(&emb, &seq, &omega).unwrap();
        let d_est: Vec<f64> = run
            .estimates
            .iter()
            .zip(&targets)
            .map(|(u, c)| u - c)
            .collect();
        value.backward(&run, &d_est);

        let report = grad_check(&mut value, loss_fn, 1e-4, 1e-3).unwrap();
        assert!(
            report.max_rel_error < 1e-5,
            "max rel error {} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }
}
