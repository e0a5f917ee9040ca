//! Fixation probability broken down by part of speech.

use crate::corpus::PosTag;
use crate::error::{Error, Result};
use crate::eval::metrics::{pearson, spearman};

/// Mean fixation probability for one tag, in percent.
#[derive(Debug, Clone)]
pub struct PosRow {
    pub tag: PosTag,
    pub count: usize,
    pub mean_prob_pct: f64,
    /// 1 = most fixated tag.
    pub rank: usize,
}

/// Per-tag means over (tag, probability) pairs. Rows cover the tags that
/// occur, in canonical tag order; ranks order the means descending.
pub fn pos_table(tags: &[PosTag], probs: &[f64]) -> Result<Vec<PosRow>> {
    if tags.len() != probs.len() {
        return Err(Error::Dimension {
            context: "pos_table lengths",
            expected: tags.len(),
            actual: probs.len(),
        });
    }
    if tags.is_empty() {
        return Err(Error::Empty("pos_table inputs"));
    }
    let mut sums = [0.0f64; PosTag::ALL.len()];
    let mut counts = [0usize; PosTag::ALL.len()];
    for (&tag, &p) in tags.iter().zip(probs) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "fixation probability {p} outside [0, 1]"
            )));
        }
        let k = PosTag::ALL.iter().position(|t| *t == tag).unwrap();
        sums[k] += p;
        counts[k] += 1;
    }
    let mut rows: Vec<PosRow> = PosTag::ALL
        .iter()
        .enumerate()
        .filter(|(k, _)| counts[*k] > 0)
        .map(|(k, &tag)| PosRow {
            tag,
            count: counts[k],
            mean_prob_pct: 100.0 * sums[k] / counts[k] as f64,
            rank: 0,
        })
        .collect();
    // Ranks: descending mean, ties resolved by tag order for determinism.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[b]
            .mean_prob_pct
            .partial_cmp(&rows[a].mean_prob_pct)
            .unwrap()
            .then(a.cmp(&b))
    });
    for (rank0, &i) in order.iter().enumerate() {
        rows[i].rank = rank0 + 1;
    }
    Ok(rows)
}

/// Agreement between two per-tag tables over their shared tags.
#[derive(Debug, Clone)]
pub struct PosComparison {
    /// Mean squared difference of the percentages.
    pub mse: f64,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub shared_tags: usize,
}

pub fn pos_compare(a: &[PosRow], b: &[PosRow]) -> Result<PosComparison> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ra in a {
        if let Some(rb) = b.iter().find(|r| r.tag == ra.tag) {
            xs.push(ra.mean_prob_pct);
            ys.push(rb.mean_prob_pct);
        }
    }
    if xs.is_empty() {
        return Err(Error::Empty("shared part-of-speech tags"));
    }
    let mse = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / xs.len() as f64;
    Ok(PosComparison {
        mse,
        pearson: pearson(&xs, &ys),
        spearman: spearman(&xs, &ys),
        shared_tags: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn means_ranks_and_percent_units() {
        let tags = [PosTag::Noun, PosTag::Noun, PosTag::Det, PosTag::Verb];
        let probs = [0.8, 0.6, 0.2, 0.9];
        let rows = pos_table(&tags, &probs).unwrap();
        assert_eq!(rows.len(), 3);
        let noun = rows.iter().find(|r| r.tag == PosTag::Noun).unwrap();
        assert_abs_diff_eq!(noun.mean_prob_pct, 70.0, epsilon = 1e-12);
        assert_eq!(noun.count, 2);
        assert_eq!(noun.rank, 2);
        let verb = rows.iter().find(|r| r.tag == PosTag::Verb).unwrap();
        assert_eq!(verb.rank, 1);
        let det = rows.iter().find(|r| r.tag == PosTag::Det).unwrap();
        assert_eq!(det.rank, 3);
    }

    #[test]
    fn comparison_on_identical_tables_is_perfect() {
        let tags = [PosTag::Noun, PosTag::Det, PosTag::Verb, PosTag::Adj];
        let probs = [0.7, 0.2, 0.5, 0.65];
        let rows = pos_table(&tags, &probs).unwrap();
        let cmp = pos_compare(&rows, &rows).unwrap();
        assert_abs_diff_eq!(cmp.mse, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.pearson.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.spearman.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(cmp.shared_tags, 4);
    }

    #[test]
    fn comparison_uses_shared_tags_only() {
        let a = pos_table(&[PosTag::Noun, PosTag::Det], &[0.8, 0.3]).unwrap();
        let b = pos_table(&[PosTag::Noun, PosTag::Verb], &[0.6, 0.4]).unwrap();
        let cmp = pos_compare(&a, &b).unwrap();
        assert_eq!(cmp.shared_tags, 1);
        // (80 - 60)^2 = 400.
        assert_abs_diff_eq!(cmp.mse, 400.0, epsilon = 1e-12);
        assert_eq!(cmp.pearson, None);
    }
}
