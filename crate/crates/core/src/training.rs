//! Two-phase training.
//!
//! Phase 1 trains the reader, decoder and embeddings by SGD on sequences
//! whose fixation masks are drawn i.i.d. Bernoulli, so the networks learn to
//! operate under partial input. Phase 2 freezes them and trains only the
//! attention module with a score-function gradient estimator: each sampled
//! episode's cost (prediction loss + reconstruction loss + alpha per
//! fixation) is compared against a learned per-position baseline U_i, and
//! an entropy term with weight gamma keeps decisions stochastic early on.

use crate::error::{Error, Result};
use crate::model::{Episode, ModelParams};
use crate::optim::{sgd_step, SgdConfig};
use crate::scalar::Scalar;
use crate::tensor::ParamGroup;
use crate::value::ValueParams;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Cost per fixation in the training objective.
    pub alpha: f64,
    /// Entropy bonus weight for attention training.
    pub gamma: f64,
    /// Bernoulli fixation rate for phase-1 masks.
    pub phase1_mask_rate: f64,
    pub phase1_lr: f64,
    pub phase2_lr: f64,
    pub value_lr: f64,
    pub batch_size: usize,
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    /// Global gradient-norm clip applied to every update.
    pub clip_norm: f64,
    /// Uniform init bound for all weights.
    pub init_bound: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 5.0,
            gamma: 5.0,
            phase1_mask_rate: 0.62,
            phase1_lr: 0.1,
            phase2_lr: 0.01,
            value_lr: 0.01,
            batch_size: 16,
            phase1_epochs: 5,
            phase2_epochs: 2,
            clip_norm: 5.0,
            init_bound: 0.05,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.phase1_mask_rate) {
            return Err(Error::Config(format!(
                "phase1_mask_rate must be in [0, 1], got {}",
                self.phase1_mask_rate
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("phase1_lr", self.phase1_lr),
            ("phase2_lr", self.phase2_lr),
            ("value_lr", self.value_lr),
            ("clip_norm", self.clip_norm),
            ("init_bound", self.init_bound),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// One progress line per batch. `fixation_rate` is the mean over the batch,
/// `mean_entropy` the mean Bernoulli entropy of the attention probabilities
/// (zero during phase 1 where no attention runs).
#[derive(Debug, Clone)]
pub struct ProgressRecord {
    pub phase: u8,
    pub epoch: usize,
    pub batch: usize,
    pub mean_cost: f64,
    pub fixation_rate: f64,
    pub mean_entropy: f64,
}

pub type Progress<'a> = Option<&'a mut dyn FnMut(&ProgressRecord)>;

#[derive(Debug, Clone)]
pub struct PhaseStats {
    pub batches: usize,
    pub final_mean_cost: f64,
    pub final_fixation_rate: f64,
    /// Episodes dropped because their cost was non-finite.
    pub skipped_non_finite: usize,
}

/// Entropy of a Bernoulli(p) decision in nats, with 0 ln 0 = 0.
pub fn entropy<F: Scalar>(p: F) -> F {
    let q = F::one() - p;
    let mut h = F::zero();
    if p > F::zero() {
        h = h - p * p.ln();
    }
    if q > F::zero() {
        h = h - q * q.ln();
    }
    h
}

fn bernoulli_mask<R: Rng>(n: usize, rate: f64, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.gen_range(0.0..1.0) < rate).collect()
}

const PHASE1_SALT: u64 = 0x9e3779b97f4a7c15;
const PHASE2_SALT: u64 = 0x6a09e667f3bcc908;

/// Trains reader, decoder and embeddings under random Bernoulli masks.
/// The attention module is untouched. Aborts with an error if any batch
/// produces a non-finite loss (phase-1 divergence is deterministic for a
/// given seed, so it is reported rather than skipped).
pub fn train_phase1<F: Scalar>(
    model: &mut ModelParams<F>,
    seqs: &[Vec<u32>],
    cfg: &TrainConfig,
    mut progress: Progress,
) -> Result<PhaseStats> {
    cfg.validate()?;
    if seqs.is_empty() {
        return Err(Error::Empty("phase-1 training sequences"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PHASE1_SALT);
    let sgd = SgdConfig {
        lr: F::of(cfg.phase1_lr),
        clip_norm: Some(F::of(cfg.clip_norm)),
    };
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut stats = PhaseStats {
        batches: 0,
        final_mean_cost: f64::NAN,
        final_fixation_rate: f64::NAN,
        skipped_non_finite: 0,
    };
    for epoch in 0..cfg.phase1_epochs {
        order.shuffle(&mut rng);
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            model.zero_grads();
            let mut loss_sum = 0.0;
            let mut fix_sum = 0.0;
            for &idx in batch {
                let seq = &seqs[idx];
                let omega = bernoulli_mask(seq.len(), cfg.phase1_mask_rate, &mut rng);
                let pass = model.phase1_forward(seq, &omega)?;
                if !pass.loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "phase-1 loss at epoch {epoch}, batch {batch_no}"
                    )));
                }
                model.phase1_backward(seq, &omega, &pass);
                loss_sum += pass.loss.to_f64_lossy();
                fix_sum += omega.iter().filter(|b| **b).count() as f64 / omega.len() as f64;
            }
            let m = batch.len() as f64;
            model.scale_grads(F::of(1.0 / m));
            sgd_step(model, &sgd)?;
            stats.batches += 1;
            stats.final_mean_cost = loss_sum / m;
            stats.final_fixation_rate = fix_sum / m;
            if let Some(cb) = progress.as_deref_mut() {
                cb(&ProgressRecord {
                    phase: 1,
                    epoch,
                    batch: batch_no,
                    mean_cost: loss_sum / m,
                    fixation_rate: fix_sum / m,
                    mean_entropy: 0.0,
                });
            }
        }
    }
    Ok(stats)
}

/// Per-position gradient on the pre-sigmoid attention scores for one
/// episode: the score-function term (cost - U_i) d log P(omega_i) / du_i
/// plus the entropy bonus, both written as quantities to descend.
pub fn policy_score_grads<F: Scalar>(
    episode: &Episode<F>,
    baselines: &[F],
    gamma: F,
) -> Vec<F> {
    let one = F::one();
    episode
        .run
        .att
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let a = step.prob;
            let omega = if episode.run.mask.omega[i] { one } else { F::zero() };
            let advantage = episode.cost - baselines[i];
            // d(-H)/du = u a (1 - a), scaled by gamma: descending this
            // pushes probabilities toward one half.
            advantage * (omega - a) + gamma * step.pre * a * (one - a)
        })
        .collect()
}

/// Accumulates one episode's policy gradient into the attention parameters.
pub fn accumulate_policy_gradient<F: Scalar>(
    model: &mut ModelParams<F>,
    episode: &Episode<F>,
    baselines: &[F],
    gamma: F,
) {
    let du = policy_score_grads(episode, baselines, gamma);
    model.attention_backward(&episode.run.att, &du);
}

/// Trains the attention module by sampled episodes with the value-estimator
/// baseline, and the value estimator itself by squared error against each
/// episode's realized cost. Everything else is frozen: reader, decoder and
/// embedding values are left bitwise unchanged.
pub fn train_phase2<F: Scalar>(
    model: &mut ModelParams<F>,
    value: &mut ValueParams<F>,
    seqs: &[Vec<u32>],
    cfg: &TrainConfig,
    mut progress: Progress,
) -> Result<PhaseStats> {
    cfg.validate()?;
    if seqs.is_empty() {
        return Err(Error::Empty("phase-2 training sequences"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PHASE2_SALT);
    let att_sgd = SgdConfig {
        lr: F::of(cfg.phase2_lr),
        clip_norm: Some(F::of(cfg.clip_norm)),
    };
    let value_sgd = SgdConfig {
        lr: F::of(cfg.value_lr),
        clip_norm: Some(F::of(cfg.clip_norm)),
    };
    let gamma = F::of(cfg.gamma);
    let alpha = F::of(cfg.alpha);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut stats = PhaseStats {
        batches: 0,
        final_mean_cost: f64::NAN,
        final_fixation_rate: f64::NAN,
        skipped_non_finite: 0,
    };
    for epoch in 0..cfg.phase2_epochs {
        order.shuffle(&mut rng);
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            model.attention_mut().zero_grads();
            value.zero_grads();
            let mut cost_sum = 0.0;
            let mut fix_sum = 0.0;
            let mut ent_sum = 0.0;
            let mut used = 0usize;
            for &idx in batch {
                let seq = &seqs[idx];
                let episode = model.sample_episode(seq, alpha, &mut rng)?;
                if !episode.cost.is_finite() {
                    stats.skipped_non_finite += 1;
                    continue;
                }
                let vrun = value.forward(&model.embeddings, seq, &episode.run.mask.omega)?;
                accumulate_policy_gradient(model, &episode, &vrun.estimates, gamma);
                let d_est: Vec<F> = vrun
                    .estimates
                    .iter()
                    .map(|u| *u - episode.cost)
                    .collect();
                value.backward(&vrun, &d_est);

                cost_sum += episode.cost.to_f64_lossy();
                fix_sum += episode.run.mask.fixation_rate();
                ent_sum += episode
                    .run
                    .mask
                    .probs
                    .iter()
                    .map(|p| entropy(*p).to_f64_lossy())
                    .sum::<f64>()
                    / seq.len() as f64;
                used += 1;
            }
            if used == 0 {
                continue;
            }
            let m = used as f64;
            let inv = F::of(1.0 / m);
            model.attention_mut().scale_grads(inv);
            value.scale_grads(inv);
            sgd_step(&mut model.attention_mut(), &att_sgd)?;
            sgd_step(value, &value_sgd)?;
            stats.batches += 1;
            stats.final_mean_cost = cost_sum / m;
            stats.final_fixation_rate = fix_sum / m;
            if let Some(cb) = progress.as_deref_mut() {
                cb(&ProgressRecord {
                    phase: 2,
                    epoch,
                    batch: batch_no,
                    mean_cost: cost_sum / m,
                    fixation_rate: fix_sum / m,
                    mean_entropy: ent_sum / m,
                });
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte-Carlo estimate of the training objective E[cost] under the current
/// attention policy, with its standard error.
pub fn objective_estimate<F: Scalar>(
    model: &ModelParams<F>,
    seqs: &[Vec<u32>],
    alpha: f64,
    samples: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<MeanStderr> {
    if seqs.is_empty() {
        return Err(Error::Empty("objective estimate sequences"));
    }
    if samples == 0 {
        return Err(Error::Config("objective estimate needs samples > 0".into()));
    }
    let alpha_f = F::of(alpha);
    let mut costs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let pick = (rng.next_u64() % seqs.len() as u64) as usize;
        let ep = model.sample_episode(&seqs[pick], alpha_f, rng)?;
        costs.push(ep.cost.to_f64_lossy());
    }
    let mean = costs.iter().sum::<f64>() / samples as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
        / (samples.max(2) - 1) as f64;
    Ok(MeanStderr {
        mean,
        stderr: (var / samples as f64).sqrt(),
    })
}
