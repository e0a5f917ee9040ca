//! Evaluation report: one serializable record with a plain-text rendering.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerplexityRow {
    pub label: String,
    pub fixation_rate: f64,
    pub lm_perplexity: f64,
    pub reconstruction_perplexity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub label: String,
    pub accuracy_pct: f64,
    pub f1_fix_pct: f64,
    pub f1_skip_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LikelihoodRow {
    pub label: String,
    pub perplexity: f64,
    pub cross_entropy_bits: f64,
    pub decisions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionCoefRow {
    pub model: String,
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub t_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionModelRow {
    pub label: String,
    pub log_likelihood: f64,
    /// Deviance improvement over the baseline predictor set.
    pub deviance_vs_baseline: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionReport {
    pub n: usize,
    pub baseline_log_likelihood: f64,
    pub models: Vec<RegressionModelRow>,
    pub coefficients: Vec<RegressionCoefRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRow {
    /// Whose fixation probabilities are being explained.
    pub target: String,
    pub predictor: String,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosCompareRow {
    pub tag: String,
    pub count: usize,
    pub human_pct: f64,
    pub model_pct: f64,
    pub human_rank: usize,
    pub model_rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosReport {
    pub rows: Vec<PosCompareRow>,
    pub mse: f64,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalRow {
    pub label: String,
    pub conditional: f64,
    pub marginal: f64,
    pub ratio: f64,
    pub pairs: usize,
}

/// Everything the evaluate step measures. Optional sections are omitted
/// when their inputs are unavailable.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub seed: u64,
    pub config_hash: String,
    /// Fixation rate the comparison masks were calibrated to.
    pub fixation_target: f64,
    pub evaluation_points: usize,
    pub perplexity: Vec<PerplexityRow>,
    pub prediction: Vec<PredictionRow>,
    pub fixation_likelihood: Vec<LikelihoodRow>,
    pub regression: Option<RegressionReport>,
    pub correlations: Vec<CorrelationRow>,
    pub pos: Option<PosReport>,
    pub conditional_fixation: Vec<ConditionalRow>,
    pub notes: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:8.3}"),
        None => format!("{:>8}", "-"),
    }
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("report serialization: {e}")))
    }

    pub fn from_json(body: &str) -> Result<Self> {
        serde_json::from_str(body).map_err(|e| Error::Data(format!("report parse: {e}")))
    }

    /// Aligned text tables for terminal consumption.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let section = |title: &str, body: String, out: &mut String| {
            if body.is_empty() {
                return;
            }
            out.push_str(&format!("== {title} ==\n{body}\n"));
        };

        out.push_str(&format!(
            "seed {}  config {}  target fixation rate {:.4}  evaluation points {}\n\n",
            self.seed, self.config_hash, self.fixation_target, self.evaluation_points
        ));

        let mut body = String::new();
        for r in &self.perplexity {
            body.push_str(&format!(
                "{:<22} rate {:6.3}  lm ppl {:10.2}  reconstruction ppl {:10.2}\n",
                r.label, r.fixation_rate, r.lm_perplexity, r.reconstruction_perplexity
            ));
        }
        section("perplexity", body, &mut out);

        let mut body = String::new();
        for r in &self.prediction {
            body.push_str(&format!(
                "{:<22} accuracy {:6.1}  f1 fixate {:6.1}  f1 skip {:6.1}\n",
                r.label, r.accuracy_pct, r.f1_fix_pct, r.f1_skip_pct
            ));
        }
        section("fixation prediction (%)", body, &mut out);

        let mut body = String::new();
        for r in &self.fixation_likelihood {
            body.push_str(&format!(
                "{:<28} perplexity {:7.3}  bits {:6.3}  decisions {}\n",
                r.label, r.perplexity, r.cross_entropy_bits, r.decisions
            ));
        }
        section("fixation sequence likelihood", body, &mut out);

        if let Some(reg) = &self.regression {
            let mut body = format!(
                "n = {}, baseline log likelihood {:.2}\n",
                reg.n, reg.baseline_log_likelihood
            );
            for m in &reg.models {
                body.push_str(&format!(
                    "{:<28} log lik {:12.2}  deviance vs baseline {:10.2}\n",
                    m.label, m.log_likelihood, m.deviance_vs_baseline
                ));
            }
            if !reg.coefficients.is_empty() {
                body.push_str("coefficients:\n");
                for c in &reg.coefficients {
                    body.push_str(&format!(
                        "  {:<26} {:<18} {:12.4} (se {:10.4}, t {:8.2})\n",
                        c.model, c.name, c.coef, c.std_err, c.t_value
                    ));
                }
            }
            section("reading time regression", body, &mut out);
        }

        let mut body = String::new();
        for r in &self.correlations {
            body.push_str(&format!(
                "{:<8} ~ {:<22} pearson {}  spearman {}  n {}\n",
                r.target,
                r.predictor,
                fmt_opt(r.pearson),
                fmt_opt(r.spearman),
                r.n
            ));
        }
        section("fixation probability correlations", body, &mut out);

        if let Some(pos) = &self.pos {
            let mut body = String::from(
                "tag      count   human %  model %  human rank  model rank\n",
            );
            for r in &pos.rows {
                body.push_str(&format!(
                    "{:<8} {:>5} {:>9.1} {:>8.1} {:>11} {:>11}\n",
                    r.tag, r.count, r.human_pct, r.model_pct, r.human_rank, r.model_rank
                ));
            }
            body.push_str(&format!(
                "mse {:.2}  pearson {}  spearman {}\n",
                pos.mse,
                fmt_opt(pos.pearson),
                fmt_opt(pos.spearman)
            ));
            section("fixation probability by part of speech", body, &mut out);
        }

        let mut body = String::new();
        for r in &self.conditional_fixation {
            body.push_str(&format!(
                "{:<22} P(fix|prev fix) {:6.3}  P(fix) {:6.3}  ratio {:6.3}  pairs {}\n",
                r.label, r.conditional, r.marginal, r.ratio, r.pairs
            ));
        }
        section("successive fixations", body, &mut out);

        if !self.notes.is_empty() {
            let mut body = String::new();
            for n in &self.notes {
                body.push_str(&format!("- {n}\n"));
            }
            section("notes", body, &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvalReport {
        EvalReport {
            seed: 11,
            config_hash: "deadbeef".into(),
            fixation_target: 0.62,
            evaluation_points: 123,
            perplexity: vec![PerplexityRow {
                label: "model".into(),
                fixation_rate: 0.61,
                lm_perplexity: 180.0,
                reconstruction_perplexity: 4.5,
            }],
            prediction: vec![PredictionRow {
                label: "model".into(),
                accuracy_pct: 63.7,
                f1_fix_pct: 70.4,
                f1_skip_pct: 53.0,
            }],
            fixation_likelihood: vec![LikelihoodRow {
                label: "model".into(),
                perplexity: 1.84,
                cross_entropy_bits: 0.88,
                decisions: 999,
            }],
            correlations: vec![CorrelationRow {
                target: "human".into(),
                predictor: "word length".into(),
                pearson: Some(0.66),
                spearman: None,
                n: 123,
            }],
            ..EvalReport::default()
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample();
        let json = r.to_json().unwrap();
        let back = EvalReport::from_json(&json).unwrap();
        assert_eq!(back.seed, r.seed);
        assert_eq!(back.perplexity.len(), 1);
        assert_eq!(back.correlations[0].spearman, None);
        // Deterministic serialization.
        assert_eq!(json, back.to_json().unwrap());
    }

    #[test]
    fn text_rendering_contains_all_sections_present() {
        let text = sample().render_text();
        assert!(text.contains("== perplexity =="));
        assert!(text.contains("== fixation prediction"));
        assert!(text.contains("== fixation sequence likelihood =="));
        assert!(text.contains("== fixation probability correlations =="));
        assert!(!text.contains("== reading time regression =="));
        assert!(text.contains("deadbeef"));
    }
}
