//! Likelihood of observed fixation sequences under a decision model.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

/// Scores of a set of binary decisions under some probability model.
#[derive(Debug, Clone, Copy)]
pub struct FixationLikelihood {
    /// Mean negative log likelihood per decision, natural log.
    pub nll_per_decision: f64,
    /// exp of the mean NLL.
    pub perplexity: f64,
    /// Mean NLL in bits.
    pub cross_entropy_bits: f64,
    pub decisions: usize,
}

fn summarize(total_nll: f64, decisions: usize) -> Result<FixationLikelihood> {
    if decisions == 0 {
        return Err(Error::Empty("fixation decisions"));
    }
    let nll = total_nll / decisions as f64;
    Ok(FixationLikelihood {
        nll_per_decision: nll,
        perplexity: nll.exp(),
        cross_entropy_bits: nll / std::f64::consts::LN_2,
        decisions,
    })
}

/// Scores decisions against per-decision fixation probabilities.
pub fn score_decisions(probs: &[f64], decisions: &[bool]) -> Result<FixationLikelihood> {
    if probs.len() != decisions.len() {
        return Err(Error::Dimension {
            context: "fixation likelihood lengths",
            expected: decisions.len(),
            actual: probs.len(),
        });
    }
    let mut total = 0.0;
    for (&p, &d) in probs.iter().zip(decisions) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "fixation probability {p} outside [0, 1]"
            )));
        }
        let q = if d { p } else { 1.0 - p };
        total -= q.ln(); // q = 0 yields +inf, reported as such
    }
    summarize(total, decisions.len())
}

/// Scores under a constant Bernoulli(p) model; the analytic comparison
/// point for any sequence model.
pub fn constant_model(decisions: &[bool], p: f64) -> Result<FixationLikelihood> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Config(format!(
            "constant fixation probability must be inside (0, 1), got {p}"
        )));
    }
    let probs = vec![p; decisions.len()];
    score_decisions(&probs, decisions)
}

/// The per-word empirical lower bound: each word type scores its decisions
/// with its own empirical fixation rate (estimated on the same data, so
/// this is the entropy of the per-word rates; rates of exactly 0 or 1
/// contribute nothing by the 0 ln 0 = 0 convention).
pub fn per_word_rate_bound(word_ids: &[u32], decisions: &[bool]) -> Result<FixationLikelihood> {
    if word_ids.len() != decisions.len() {
        return Err(Error::Dimension {
            context: "per-word bound lengths",
            expected: decisions.len(),
            actual: word_ids.len(),
        });
    }
    if word_ids.is_empty() {
        return Err(Error::Empty("fixation decisions"));
    }
    // BTreeMap keeps the accumulation order (and thus the rounding) stable
    // across processes; HashMap order would leak into the low bits.
    use std::collections::BTreeMap;
    let mut per_word: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&w, &d) in word_ids.iter().zip(decisions) {
        let e = per_word.entry(w).or_insert((0, 0));
        e.0 += 1;
        if d {
            e.1 += 1;
        }
    }
    let mut total = 0.0;
    for (count, fixed) in per_word.values() {
        let n = *count as f64;
        let k = *fixed as f64;
        let p = k / n;
        if p > 0.0 {
            total -= k * p.ln();
        }
        if p < 1.0 {
            total -= (n - k) * (1.0 - p).ln();
        }
    }
    summarize(total, word_ids.len())
}

/// One sequence with one reader's (possibly incomplete) decisions.
#[derive(Debug, Clone)]
pub struct MaskedSequence {
    pub ids: Vec<u32>,
    pub decisions: Vec<Option<bool>>,
}

/// What drives the reader at positions whose human decision is missing.
/// Missing positions are never scored either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingFill {
    Fixate,
    Skip,
}

/// Likelihood of human fixation sequences under the attention module: the
/// reader is driven by each human mask (missing entries filled per
/// `fill`), and each observed decision is scored against the attention
/// probability at that point, which is conditioned on the driven prefix.
pub fn model_fixation_likelihood<F: Scalar>(
    model: &ModelParams<F>,
    sequences: &[MaskedSequence],
    fill: MissingFill,
) -> Result<FixationLikelihood> {
    let mut total = 0.0;
    let mut decisions = 0usize;
    for seq in sequences {
        if seq.ids.len() != seq.decisions.len() {
            return Err(Error::Dimension {
                context: "masked sequence lengths",
                expected: seq.ids.len(),
                actual: seq.decisions.len(),
            });
        }
        let omega: Vec<bool> = seq
            .decisions
            .iter()
            .map(|d| d.unwrap_or(fill == MissingFill::Fixate))
            .collect();
        let run = model.reader_drive(&seq.ids, &omega)?;
        for (i, d) in seq.decisions.iter().enumerate() {
            if let Some(fixated) = d {
                let a = run.mask.probs[i].to_f64_lossy();
                let q = if *fixated { a } else { 1.0 - a };
                total -= q.ln();
                decisions += 1;
            }
        }
    }
    summarize(total, decisions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uninformed_model_scores_perplexity_two() {
        let decisions = [true, false, true, true, false, false];
        let lik = constant_model(&decisions, 0.5).unwrap();
        assert_abs_diff_eq!(lik.perplexity, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lik.cross_entropy_bits, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_model_cross_entropy_is_analytic() {
        // 613 fixations out of 1000 scored against p = 0.62:
        // nll = -(0.613 ln 0.62 + 0.387 ln 0.38).
        let mut decisions = vec![true; 613];
        decisions.extend(vec![false; 387]);
        let lik = constant_model(&decisions, 0.62).unwrap();
        let expected = -(0.613 * 0.62f64.ln() + 0.387 * 0.38f64.ln());
        assert_abs_diff_eq!(lik.nll_per_decision, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(lik.perplexity, 1.9493402151977504, epsilon = 1e-9);
    }

    #[test]
    fn matched_rate_scores_entropy() {
        // When the model probability equals the empirical rate, the mean
        // NLL is the Bernoulli entropy of that rate.
        let mut decisions = vec![true; 62];
        decisions.extend(vec![false; 38]);
        let lik = constant_model(&decisions, 0.62).unwrap();
        assert_abs_diff_eq!(lik.nll_per_decision, 0.6640641265641081, epsilon = 1e-12);
    }

    /// Any probability other than the empirical rate scores worse: Gibbs'
    /// inequality at the Bernoulli level.
    #[test]
    fn mismatched_probabilities_score_worse() {
        let mut decisions = vec![true; 62];
        decisions.extend(vec![false; 38]);
        let matched = constant_model(&decisions, 0.62).unwrap();
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let off = constant_model(&decisions, p).unwrap();
            assert!(
                off.nll_per_decision > matched.nll_per_decision,
                "p = {p} did not score worse"
            );
        }
    }

    #[test]
    fn per_word_bound_is_at_most_pooled_entropy() {
        // Two word types with different rates: word 0 fixated 9/10, word 1
        // fixated 1/10. Pooled rate is 0.5.
        let mut ids = Vec::new();
        let mut decisions = Vec::new();
        for i in 0..10 {
            ids.push(0u32);
            decisions.push(i < 9);
            ids.push(1u32);
            decisions.push(i < 1);
        }
        let bound = per_word_rate_bound(&ids, &decisions).unwrap();
        let pooled = constant_model(&decisions, 0.5).unwrap();
        assert!(bound.nll_per_decision < pooled.nll_per_decision);
        // Per-word entropy of rate 0.9 and 0.1 is identical: H(0.9).
        let h = -(0.9f64.ln() * 0.9 + 0.1f64.ln() * 0.1);
        assert_abs_diff_eq!(bound.nll_per_decision, h, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_words_contribute_zero() {
        let ids = [5u32, 5, 5, 8, 8];
        let decisions = [true, true, true, false, false];
        let bound = per_word_rate_bound(&ids, &decisions).unwrap();
        assert_abs_diff_eq!(bound.nll_per_decision, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bound.perplexity, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn score_decisions_validates() {
        assert!(score_decisions(&[0.5, 1.2], &[true, false]).is_err());
        assert!(score_decisions(&[0.5], &[true, false]).is_err());
        assert!(constant_model(&[true], 1.0).is_err());
    }

    #[test]
    fn model_likelihood_runs_and_respects_missing() {
        use crate::model::{ModelConfig, ModelParams};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let model =
            ModelParams::<f64>::init(ModelConfig::tiny_for_tests(), 0.3, &mut rng).unwrap();
        let seqs = vec![MaskedSequence {
            ids: vec![1, 2, 3, 4, 5],
            decisions: vec![Some(true), None, Some(false), Some(true), None],
        }];
        let lik = model_fixation_likelihood(&model, &seqs, MissingFill::Fixate).unwrap();
        assert_eq!(lik.decisions, 3);
        assert!(lik.perplexity.is_finite() && lik.perplexity > 1.0);
        // Filling missing with skips changes downstream probabilities, so
        // the score may differ, but the decision count must not.
        let lik2 = model_fixation_likelihood(&model, &seqs, MissingFill::Skip).unwrap();
        assert_eq!(lik2.decisions, 3);
    }
}
