//! Scalar evaluation metrics.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// exp of the mean negative log likelihood (natural log).
pub fn perplexity<F: Scalar>(nll: &[F]) -> Result<f64> {
    if nll.is_empty() {
        return Err(Error::Empty("negative log likelihoods"));
    }
    let mean = nll.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / nll.len() as f64;
    Ok(mean.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyF1 {
    pub accuracy: f64,
    /// F1 treating fixation as the positive class.
    pub f1_fix: f64,
    /// F1 treating skipping as the positive class.
    pub f1_skip: f64,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        // No positives anywhere and none predicted: perfect agreement.
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

pub fn accuracy_f1(pred: &[bool], gold: &[bool]) -> Result<AccuracyF1> {
    if pred.len() != gold.len() {
        return Err(Error::Dimension {
            context: "accuracy_f1 lengths",
            expected: gold.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("accuracy_f1 inputs"));
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(AccuracyF1 {
        accuracy: (tp + tn) as f64 / pred.len() as f64,
        f1_fix: f1(tp, fp, fn_),
        // For the skip class the confusion matrix transposes: true
        // negatives become true positives and the error roles swap.
        f1_skip: f1(tn, fn_, fp),
    })
}

/// Sample Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n != b.len() || n < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let mut sa = 0.0;
    let mut sb = 0.0;
    let mut sab = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        sa += (x - ma) * (x - ma);
        sb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if sa <= 0.0 || sb <= 0.0 {
        None
    } else {
        Some(sab / (sa.sqrt() * sb.sqrt()))
    }
}

/// Ranks with ties sharing their average rank (1-based).
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut j = k;
        while j + 1 < n && v[idx[j + 1]] == v[idx[k]] {
            j += 1;
        }
        // Positions k..=j hold tied values; mean of ranks k+1..=j+1.
        let mean_rank = (k + j + 2) as f64 / 2.0;
        for &m in &idx[k..=j] {
            ranks[m] = mean_rank;
        }
        k = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Debug, Clone, Copy)]
pub struct Correlations {
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n: usize,
}

/// Both correlation coefficients. Inputs must be finite, equally long and
/// hold at least 3 points; degenerate (zero-variance) sides yield `None`
/// coefficients rather than errors.
pub fn correlations(a: &[f64], b: &[f64]) -> Result<Correlations> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "correlation lengths",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::Config(format!(
            "correlations need at least 3 points, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation inputs".into()));
    }
    Ok(Correlations {
        pearson: pearson(a, b),
        spearman: spearman(a, b),
        n: a.len(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionalFixation {
    /// P(fixate i | fixated i-1), pooled over all adjacent pairs.
    pub conditional: f64,
    /// P(fixate i) over the same pairs.
    pub marginal: f64,
    /// conditional / marginal; below 1 means successive fixations repel.
    pub ratio: f64,
    pub pairs: usize,
}

/// Pooled successive-fixation statistics over masks that may have missing
/// entries; a pair counts only when both decisions are known. `None` when
/// no pair has a fixated predecessor or the marginal is zero.
pub fn conditional_fixation_ratio(masks: &[Vec<Option<bool>>]) -> Option<ConditionalFixation> {
    let mut pairs = 0usize;
    let mut prev_fix = 0usize;
    let mut both = 0usize;
    let mut second_fix = 0usize;
    for mask in masks {
        for w in mask.windows(2) {
            if let (Some(a), Some(b)) = (w[0], w[1]) {
                pairs += 1;
                if b {
                    second_fix += 1;
                }
                if a {
                    prev_fix += 1;
                    if b {
                        both += 1;
                    }
                }
            }
        }
    }
    if pairs == 0 || prev_fix == 0 || second_fix == 0 {
        return None;
    }
    let conditional = both as f64 / prev_fix as f64;
    let marginal = second_fix as f64 / pairs as f64;
    Some(ConditionalFixation {
        conditional,
        marginal,
        ratio: conditional / marginal,
        pairs,
    })
}

/// Same statistic for fully observed masks.
pub fn conditional_fixation_ratio_known(masks: &[Vec<bool>]) -> Option<ConditionalFixation> {
    let wrapped: Vec<Vec<Option<bool>>> = masks
        .iter()
        .map(|m| m.iter().map(|&b| Some(b)).collect())
        .collect();
    conditional_fixation_ratio(&wrapped)
}
