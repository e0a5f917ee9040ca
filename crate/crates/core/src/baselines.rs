//! Reference fixation strategies the learned policy is compared against.

use crate::error::{Error, Result};
use crate::model::FixationMask;
use crate::scalar::Scalar;
use rand::Rng;

/// I.i.d. Bernoulli(p) mask.
pub fn random_mask<F: Scalar, R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<FixationMask<F>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!(
            "fixation probability must be in [0, 1], got {p}"
        )));
    }
    let omega: Vec<bool> = (0..n).map(|_| rng.gen_range(0.0..1.0) < p).collect();
    let probs = vec![F::of(p); n];
    Ok(FixationMask { omega, probs })
}

/// Which way a score maps to fixation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Fixate when the score is at or above the threshold (word length,
    /// surprisal: long or surprising words get fixated).
    FixateIfAbove,
    /// Fixate when the score is at or below the threshold (log frequency:
    /// rare words get fixated).
    FixateIfBelow,
}

/// A calibrated single-feature fixation rule.
#[derive(Debug, Clone)]
pub struct ThresholdPredictor {
    pub direction: Direction,
    pub threshold: f64,
    /// Fixation rate the threshold achieves on its calibration scores.
    pub achieved_rate: f64,
    /// True when no candidate threshold lands near the target, e.g. for
    /// heavily tied scores.
    pub degenerate: bool,
}

impl ThresholdPredictor {
    /// Picks the threshold among the distinct score values (plus a
    /// sentinel that fixates nothing) whose fixation rate on `scores` is
    /// closest to `target`. Ties between equally close candidates go to the
    /// higher fixation rate.
    pub fn calibrate(scores: &[f64], direction: Direction, target: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("threshold calibration scores"));
        }
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::Config(format!(
                "target fixation rate must be in [0, 1], got {target}"
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("threshold calibration scores".into()));
        }
        let mut candidates: Vec<f64> = scores.to_vec();
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates.dedup();
        // A sentinel beyond the score range yields the all-skip rule.
        let sentinel = match direction {
            Direction::FixateIfAbove => candidates[candidates.len() - 1] + 1.0,
            Direction::FixateIfBelow => candidates[0] - 1.0,
        };
        candidates.push(sentinel);

        let mut best: Option<(f64, f64, f64)> = None; // (distance, rate, threshold)
        for &t in &candidates {
            let rate = apply_threshold(scores, direction, t)
                .iter()
                .filter(|b| **b)
                .count() as f64
                / scores.len() as f64;
            let dist = (rate - target).abs();
            let better = match best {
                None => true,
                Some((bd, br, _)) => dist < bd - 1e-12 || (dist < bd + 1e-12 && rate > br),
            };
            if better {
                best = Some((dist, rate, t));
            }
        }
        let (dist, achieved_rate, threshold) = best.unwrap();
        // With fewer than two datapoints per step the best achievable rate
        // can still be far off; flag anything worse than one datapoint away.
        let degenerate = dist > 1.0 / scores.len() as f64 + 1e-12;
        Ok(ThresholdPredictor {
            direction,
            threshold,
            achieved_rate,
            degenerate,
        })
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<bool> {
        apply_threshold(scores, self.direction, self.threshold)
    }
}

pub fn apply_threshold(scores: &[f64], direction: Direction, threshold: f64) -> Vec<bool> {
    scores
        .iter()
        .map(|&s| match direction {
            Direction::FixateIfAbove => s >= threshold,
            Direction::FixateIfBelow => s <= threshold,
        })
        .collect()
}

/// Rescales fixation probabilities so their mean hits `target`: finds r by
/// bisection such that mean(min(r p_i, 1)) = target, then returns the
/// clipped probabilities. Order is preserved (the map is monotone).
pub fn rescale_probs<F: Scalar>(probs: &[F], target: f64) -> Result<Vec<F>> {
    if probs.is_empty() {
        return Err(Error::Empty("probabilities to rescale"));
    }
    if !(0.0 < target && target < 1.0) {
        return Err(Error::Config(format!(
            "target rate must be strictly inside (0, 1), got {target}"
        )));
    }
    let p: Vec<f64> = probs.iter().map(|v| v.to_f64_lossy()).collect();
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config(
            "probabilities to rescale must lie in [0, 1]".into(),
        ));
    }
    let mean_at = |r: f64| -> f64 {
        p.iter().map(|v| (r * v).min(1.0)).sum::<f64>() / p.len() as f64
    };
    // mean_at is nondecreasing in r with supremum = fraction of nonzero
    // entries; fail early if the target is unreachable.
    let sup = p.iter().filter(|v| **v > 0.0).count() as f64 / p.len() as f64;
    if sup < target - 1e-9 {
        return Err(Error::Config(format!(
            "target rate {target} unreachable: only {sup:.6} of probabilities are nonzero"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while mean_at(hi) < target && hi < 1e18 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    if (mean_at(r) - target).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "probability rescaling did not converge: mean {:.12} vs target {target}",
            mean_at(r)
        )));
    }
    Ok(p.iter().map(|v| F::of((r * v).min(1.0))).collect())
}

/// Deterministic mask: fixate where the probability exceeds one half.
pub fn greedy_mask<F: Scalar>(probs: &[F]) -> FixationMask<F> {
    let half = F::of(0.5);
    let omega: Vec<bool> = probs.iter().map(|p| *p > half).collect();
    FixationMask {
        omega,
        probs: probs.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_mask_rate_concentrates_around_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask: FixationMask<f64> = random_mask(20000, 0.62, &mut rng).unwrap();
        assert!((mask.fixation_rate() - 0.62).abs() < 0.01);
        assert!(random_mask::<f64, _>(5, 1.3, &mut rng).is_err());
    }

    #[test]
    fn calibrate_picks_closest_rate_with_ties_to_fixation() {
        // Scores 1..=4, fixate-if-above. Candidate thresholds give rates
        // 1.0, 0.75, 0.5, 0.25, 0.0.
        let scores = [1.0, 2.0, 3.0, 4.0];
        let pred =
            ThresholdPredictor::calibrate(&scores, Direction::FixateIfAbove, 0.6).unwrap();
        assert_abs_diff_eq!(pred.achieved_rate, 0.5, epsilon = 1e-12);
        assert!(!pred.degenerate);
        // 0.625 is equidistant between 0.5 and 0.75: tie goes to more
        // fixation.
        let pred =
            ThresholdPredictor::calibrate(&scores, Direction::FixateIfAbove, 0.625).unwrap();
        assert_abs_diff_eq!(pred.achieved_rate, 0.75, epsilon = 1e-12);
        let mask = pred.apply(&scores);
        assert_eq!(mask, vec![false, true, true, true]);
    }

    #[test]
    fn calibrate_flags_degenerate_score_sets() {
        let scores = [2.0; 10];
        let pred =
            ThresholdPredictor::calibrate(&scores, Direction::FixateIfAbove, 0.5).unwrap();
        // Only rates 1.0 and 0.0 are achievable; 0.5 is unreachable.
        assert!(pred.degenerate);
        assert_abs_diff_eq!(pred.achieved_rate, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn calibrate_below_direction_fixates_rare_words() {
        // Log-frequency style: smaller scores are rarer.
        let scores = [-5.0, -3.0, -1.0, -0.5];
        let pred =
            ThresholdPredictor::calibrate(&scores, Direction::FixateIfBelow, 0.5).unwrap();
        let mask = pred.apply(&scores);
        assert_eq!(mask, vec![true, true, false, false]);
    }

    #[test]
    fn rescale_hits_target_exactly_on_simple_cases() {
        let probs = vec![0.5f64; 8];
        let out = rescale_probs(&probs, 0.62).unwrap();
        for v in &out {
            assert_abs_diff_eq!(*v, 0.62, epsilon = 1e-9);
        }
        // Saturation: r must push the second entry to 1.
        let probs = vec![1.0f64, 0.1];
        let out = rescale_probs(&probs, 0.9).unwrap();
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out[1], 0.8, epsilon = 1e-9);
    }

    #[test]
    fn rescale_rejects_unreachable_targets() {
        let probs = vec![0.0f64, 0.0, 1.0, 1.0];
        assert!(rescale_probs(&probs, 0.9).is_err());
        assert!(rescale_probs(&probs, 0.5).is_ok());
    }

    #[test]
    fn greedy_mask_thresholds_at_half() {
        let mask = greedy_mask(&[0.2f64, 0.5, 0.7, 0.50001]);
        assert_eq!(mask.omega, vec![false, false, true, true]);
    }

    proptest! {
        /// The rescaled mean hits the target and order is preserved.
        #[test]
        fn rescale_preserves_order_and_hits_target(
            raw in proptest::collection::vec(0.01f64..1.0, 4..60),
            target in 0.05f64..0.95,
        ) {
            let out = rescale_probs::<f64>(&raw, target).unwrap();
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            prop_assert!((mean - target).abs() <= 1e-9);
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    if raw[i] < raw[j] {
                        prop_assert!(out[i] <= out[j] + 1e-15);
                    }
                }
            }
        }

        /// Calibration lands within one datapoint of the target whenever
        /// scores are distinct.
        #[test]
        fn calibrate_within_one_datapoint_for_distinct_scores(
            n in 5usize..80,
            target in 0.0f64..1.0,
            above in proptest::bool::ANY,
        ) {
            let scores: Vec<f64> = (0..n).map(|i| i as f64 * 1.7 + 0.3).collect();
            let dir = if above { Direction::FixateIfAbove } else { Direction::FixateIfBelow };
            let pred = ThresholdPredictor::calibrate(&scores, dir, target).unwrap();
            prop_assert!((pred.achieved_rate - target).abs() <= 1.0 / n as f64 + 1e-12);
            prop_assert!(!pred.degenerate);
            // The rule reproduces its own calibration rate.
            let mask = pred.apply(&scores);
            let rate = mask.iter().filter(|b| **b).count() as f64 / n as f64;
            prop_assert!((rate - pred.achieved_rate).abs() < 1e-12);
        }
    }
}
