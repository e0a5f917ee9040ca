//! Scores the trained model on the eye-tracking corpus: perplexity against
//! full and random reading, fixation prediction and likelihood against human
//! decisions, a reading-time regression, correlations, a part-of-speech
//! breakdown and conditional fixation ratios. Writes the report as JSON and
//! aligned text.

use crate::config::RunConfig;
use crate::util::{
    doc_offsets, eyetrack_windows, normalize_words, require_phase, restore_model,
    verify_checkpoint, window_rng,
};
use neat_core::baselines::{random_mask, Direction, ThresholdPredictor};
use neat_core::checkpoint::load_checkpoint;
use neat_core::corpus::{
    annotate_tokens, filter_eval_points, load_eyetrack, EyeTrackData, PosTag, TokenSequence,
    Vocabulary,
};
use neat_core::eval::{
    accuracy_f1, conditional_fixation_ratio, conditional_fixation_ratio_known, constant_model,
    correlations, deviance, ols_regression, per_word_rate_bound, perplexity, pos_compare,
    pos_table, score_decisions, ConditionalRow, CorrelationRow, EvalReport, LikelihoodRow,
    MissingFill, PerplexityRow, PosCompareRow, PosReport, PredictionRow, RegressionCoefRow,
    RegressionModelRow, RegressionReport,
};
use neat_core::eval::RegressionMatrix;
use neat_core::model::ModelParams;
use neat_core::{Error, Result};
use rayon::prelude::*;

/// Keeps the point-level random predictor off the per-window mask streams,
/// which are derived from the same evaluation seed.
const PREDICT_SALT: u64 = 0xd6e8feb86659fd93;

/// Everything one window contributes: the model's own reading, a forced
/// full reading, and a rate-matched random reading.
struct WindowRuns {
    greedy_probs: Vec<f64>,
    greedy_omega: Vec<bool>,
    greedy_nll: Vec<f64>,
    greedy_dec: Vec<f64>,
    full_nll: Vec<f64>,
    full_dec: Vec<f64>,
    random_omega: Vec<bool>,
    random_nll: Vec<f64>,
    random_dec: Vec<f64>,
}

fn run_window(
    model: &ModelParams<f64>,
    w: &TokenSequence,
    seed: u64,
    target: f64,
) -> Result<WindowRuns> {
    let n = w.ids.len();
    let greedy = model.reader_greedy(&w.ids)?;
    let greedy_dec = model.decoder_nll(&w.ids, &greedy.h_n)?;
    let full = model.reader_drive(&w.ids, &vec![true; n])?;
    let full_dec = model.decoder_nll(&w.ids, &full.h_n)?;
    let mut rng = window_rng(seed, w.doc_id, w.start as u32);
    let rmask = random_mask::<f64, _>(n, target, &mut rng)?;
    let random = model.reader_drive(&w.ids, &rmask.omega)?;
    let random_dec = model.decoder_nll(&w.ids, &random.h_n)?;
    Ok(WindowRuns {
        greedy_probs: greedy.mask.probs,
        greedy_omega: greedy.mask.omega,
        greedy_nll: greedy.nll,
        greedy_dec,
        full_nll: full.nll,
        full_dec,
        random_omega: rmask.omega,
        random_nll: random.nll,
        random_dec,
    })
}

fn push_correlation(
    rows: &mut Vec<CorrelationRow>,
    notes: &mut Vec<String>,
    target: &str,
    predictor: &str,
    a: &[f64],
    b: &[f64],
) {
    match correlations(a, b) {
        Ok(c) => rows.push(CorrelationRow {
            target: target.to_string(),
            predictor: predictor.to_string(),
            pearson: c.pearson,
            spearman: c.spearman,
            n: c.n,
        }),
        Err(e) => notes.push(format!("correlation {target} ~ {predictor} skipped: {e}")),
    }
}

fn prediction_row(label: &str, pred: &[bool], gold: &[bool]) -> Result<PredictionRow> {
    let m = accuracy_f1(pred, gold)?;
    Ok(PredictionRow {
        label: label.to_string(),
        accuracy_pct: 100.0 * m.accuracy,
        f1_fix_pct: 100.0 * m.f1_fix,
        f1_skip_pct: 100.0 * m.f1_skip,
    })
}

/// Expands a per-point vector to one entry per (point, reader) decision, so
/// point-level predictors score against the same pooled gold sequence.
fn expand_per_reader<T: Copy>(data: &EyeTrackData, points: &[usize], per_point: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for (j, &k) in points.iter().enumerate() {
        let readers = data.records[k].fixations.iter().flatten().count();
        out.extend(std::iter::repeat(per_point[j]).take(readers));
    }
    out
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let vocab = Vocabulary::load(&cfg.paths.vocab)?;
    let ckpt = load_checkpoint(&cfg.paths.attention_checkpoint)?;
    require_phase(&ckpt, "attention", &cfg.paths.attention_checkpoint)?;
    verify_checkpoint(&ckpt, cfg, &vocab)?;
    let (model, _value) = restore_model(&ckpt)?;
    let n = model.config.sequence_len;

    let mut data = load_eyetrack(&cfg.paths.eyetrack)?;
    normalize_words(&mut data, cfg.model.lowercase);
    let ann = annotate_tokens(&data, &vocab);
    let points = filter_eval_points(&data, &ann, n, cfg.eval.boundary)?;
    if points.is_empty() {
        return Err(Error::Data(
            "no usable evaluation points: every token is out of vocabulary, \
             near a window boundary or missing all decisions"
                .to_string(),
        ));
    }
    let mut is_point = vec![false; data.records.len()];
    for &k in &points {
        is_point[k] = true;
    }

    // Pooled human decisions at the evaluation points, one entry per
    // (point, reader) pair with data. Point order, then reader order.
    let mut gold: Vec<bool> = Vec::new();
    let mut gold_ids: Vec<u32> = Vec::new();
    for &k in &points {
        for d in data.records[k].fixations.iter().flatten() {
            gold.push(*d);
            gold_ids.push(ann[k].id);
        }
    }
    let human_rate = gold.iter().filter(|b| **b).count() as f64 / gold.len() as f64;
    let target = match cfg.eval.fixation_target {
        Some(t) => t,
        None if 0.0 < human_rate && human_rate < 1.0 => human_rate,
        None => {
            return Err(Error::Data(format!(
                "pooled human fixation rate is {human_rate}; set eval.fixation_target \
                 to something inside (0, 1) to evaluate against this corpus"
            )))
        }
    };

    let offsets = doc_offsets(&data);
    let windows = eyetrack_windows(&data, &vocab, n)?;
    let seed = cfg.eval.seed;
    let runs: Vec<WindowRuns> = windows
        .par_iter()
        .map(|w| run_window(&model, w, seed, target))
        .collect::<Result<_>>()?;

    // Scatter window results onto record indices.
    let mut m_prob = vec![f64::NAN; data.records.len()];
    let mut m_fix = vec![false; data.records.len()];
    let mut nll_full = vec![f64::NAN; data.records.len()];
    let mut nll_greedy = vec![f64::NAN; data.records.len()];
    for (w, o) in windows.iter().zip(&runs) {
        let base = offsets[&w.doc_id] + w.start;
        for i in 0..n {
            m_prob[base + i] = o.greedy_probs[i];
            m_fix[base + i] = o.greedy_omega[i];
            nll_full[base + i] = o.full_nll[i];
            nll_greedy[base + i] = o.greedy_nll[i];
        }
    }

    let mut notes: Vec<String> = vec![format!(
        "evaluation points are interior window positions (boundary {}), in \
         vocabulary, with at least one recorded decision",
        cfg.eval.boundary
    )];

    // Per-point vectors, in `points` order.
    let p_human: Vec<f64> = points
        .iter()
        .map(|&k| data.records[k].fixation_prob().expect("point has decisions"))
        .collect();
    let p_prob: Vec<f64> = points.iter().map(|&k| m_prob[k]).collect();
    let p_fix: Vec<bool> = points.iter().map(|&k| m_fix[k]).collect();
    let p_len: Vec<f64> = points.iter().map(|&k| data.records[k].word_len()).collect();
    let p_logf: Vec<f64> = points
        .iter()
        .map(|&k| ann[k].log_freq.expect("points are in vocabulary"))
        .collect();
    let p_full: Vec<f64> = points.iter().map(|&k| nll_full[k]).collect();
    let p_greedy: Vec<f64> = points.iter().map(|&k| nll_greedy[k]).collect();

    // Perplexities over every window position, pooled across windows.
    let mut lm_greedy = Vec::new();
    let mut lm_full = Vec::new();
    let mut lm_random = Vec::new();
    let mut dec_greedy = Vec::new();
    let mut dec_full = Vec::new();
    let mut dec_random = Vec::new();
    let mut greedy_fix = 0usize;
    let mut random_fix = 0usize;
    let mut positions = 0usize;
    for o in &runs {
        lm_greedy.extend_from_slice(&o.greedy_nll);
        lm_full.extend_from_slice(&o.full_nll);
        lm_random.extend_from_slice(&o.random_nll);
        dec_greedy.extend_from_slice(&o.greedy_dec);
        dec_full.extend_from_slice(&o.full_dec);
        dec_random.extend_from_slice(&o.random_dec);
        greedy_fix += o.greedy_omega.iter().filter(|b| **b).count();
        random_fix += o.random_omega.iter().filter(|b| **b).count();
        positions += o.greedy_omega.len();
    }
    let ppl_row = |label: &str, rate: f64, lm: &[f64], dec: &[f64]| -> Result<PerplexityRow> {
        Ok(PerplexityRow {
            label: label.to_string(),
            fixation_rate: rate,
            lm_perplexity: perplexity(lm)?,
            reconstruction_perplexity: perplexity(dec)?,
        })
    };
    let perplexity_rows = vec![
        ppl_row("full reading", 1.0, &lm_full, &dec_full)?,
        ppl_row(
            "attention (greedy)",
            greedy_fix as f64 / positions as f64,
            &lm_greedy,
            &dec_greedy,
        )?,
        ppl_row(
            "random, rate-matched",
            random_fix as f64 / positions as f64,
            &lm_random,
            &dec_random,
        )?,
    ];

    // Fixation prediction against the pooled human decisions.
    let mut prediction = Vec::new();
    prediction.push(prediction_row(
        "attention (greedy)",
        &expand_per_reader(&data, &points, &p_fix),
        &gold,
    )?);
    let thresholded = |label: &str,
                           scores: &[f64],
                           direction: Direction,
                           prediction: &mut Vec<PredictionRow>,
                           notes: &mut Vec<String>|
     -> Result<()> {
        let t = ThresholdPredictor::calibrate(scores, direction, target)?;
        if t.degenerate {
            notes.push(format!(
                "threshold for `{label}` cannot match the target rate; closest \
                 achievable is {:.3}",
                t.achieved_rate
            ));
        }
        let pred = expand_per_reader(&data, &points, &t.apply(scores));
        prediction.push(prediction_row(label, &pred, &gold)?);
        Ok(())
    };
    thresholded(
        "attention, calibrated",
        &p_prob,
        Direction::FixateIfAbove,
        &mut prediction,
        &mut notes,
    )?;
    thresholded(
        "word length",
        &p_len,
        Direction::FixateIfAbove,
        &mut prediction,
        &mut notes,
    )?;
    thresholded(
        "log frequency",
        &p_logf,
        Direction::FixateIfBelow,
        &mut prediction,
        &mut notes,
    )?;
    {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ PREDICT_SALT);
        let mask = random_mask::<f64, _>(points.len(), target, &mut rng)?;
        let pred = expand_per_reader(&data, &points, &mask.omega);
        prediction.push(prediction_row("random, rate-matched", &pred, &gold)?);
    }

    // Likelihood of the pooled decisions. The attention rows drive the
    // reader along each human mask; missing positions follow the fill
    // policy and are never scored.
    let mut fixation_likelihood = vec![LikelihoodRow {
        label: "coin flip".to_string(),
        ..likelihood_row(constant_model(&gold, 0.5)?)
    }];
    match constant_model(&gold, human_rate) {
        Ok(lik) => fixation_likelihood.push(LikelihoodRow {
            label: "constant, pooled rate".to_string(),
            ..likelihood_row(lik)
        }),
        Err(_) => notes.push(format!(
            "pooled-rate likelihood row skipped: rate {human_rate} is degenerate"
        )),
    }
    fixation_likelihood.push(LikelihoodRow {
        label: "per-word rate (bound)".to_string(),
        ..likelihood_row(per_word_rate_bound(&gold_ids, &gold)?)
    });
    let driven: Vec<(Vec<(f64, bool)>, Vec<(f64, bool)>)> = windows
        .par_iter()
        .map(|w| -> Result<(Vec<(f64, bool)>, Vec<(f64, bool)>)> {
            let base = offsets[&w.doc_id] + w.start;
            let mut fix_fill = Vec::new();
            let mut skip_fill = Vec::new();
            for r in 0..data.n_readers {
                let decs: Vec<Option<bool>> =
                    (0..n).map(|i| data.records[base + i].fixations[r]).collect();
                if !(0..n).any(|i| is_point[base + i] && decs[i].is_some()) {
                    continue;
                }
                for (fill, pairs) in [
                    (MissingFill::Fixate, &mut fix_fill),
                    (MissingFill::Skip, &mut skip_fill),
                ] {
                    let omega: Vec<bool> = decs
                        .iter()
                        .map(|d| d.unwrap_or(fill == MissingFill::Fixate))
                        .collect();
                    let run = model.reader_drive(&w.ids, &omega)?;
                    for i in 0..n {
                        if is_point[base + i] {
                            if let Some(d) = decs[i] {
                                pairs.push((run.mask.probs[i], d));
                            }
                        }
                    }
                }
            }
            Ok((fix_fill, skip_fill))
        })
        .collect::<Result<_>>()?;
    for (label, pick) in [
        ("attention, missing=fixate", 0usize),
        ("attention, missing=skip", 1usize),
    ] {
        let mut probs = Vec::new();
        let mut decs = Vec::new();
        for d in &driven {
            let pairs = if pick == 0 { &d.0 } else { &d.1 };
            for (p, b) in pairs {
                probs.push(*p);
                decs.push(*b);
            }
        }
        fixation_likelihood.push(LikelihoodRow {
            label: label.to_string(),
            ..likelihood_row(score_decisions(&probs, &decs)?)
        });
    }

    // Reading-time regression over the points that were actually fixated
    // (skipped words have no first-pass duration).
    let mut reg_points: Vec<usize> = Vec::new();
    let mut lacked_covariates = 0usize;
    let mut never_fixated = 0usize;
    for (j, &k) in points.iter().enumerate() {
        if data.records[k].first_pass_ms.is_none() {
            never_fixated += 1;
            continue;
        }
        let a = &ann[k];
        if a.log_freq.is_none() || a.prev_log_freq.is_none() || a.prev_fixated.is_none() {
            lacked_covariates += 1;
            continue;
        }
        reg_points.push(j);
    }
    let regression = if reg_points.is_empty() {
        notes.push("duration regression skipped: no point has a first-pass duration".to_string());
        None
    } else {
        let col = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
            reg_points.iter().map(|&j| f(j)).collect()
        };
        let y = col(&|j| data.records[points[j]].first_pass_ms.unwrap());
        let base_cols: Vec<(&str, Vec<f64>)> = vec![
            ("word length", col(&|j| p_len[j])),
            ("log frequency", col(&|j| p_logf[j])),
            ("prev log frequency", col(&|j| ann[points[j]].prev_log_freq.unwrap())),
            ("prev fixated", col(&|j| ann[points[j]].prev_fixated.unwrap())),
            (
                "window position",
                col(&|j| (data.records[points[j]].token_idx as usize % n + 1) as f64),
            ),
        ];
        let surp_full = ("surprisal (full reading)", col(&|j| p_full[j]));
        let surp_att = ("surprisal (attention)", col(&|j| p_greedy[j]));
        let matrix = |extra: &[&(&str, Vec<f64>)]| {
            let mut m = RegressionMatrix::new();
            for (name, c) in &base_cols {
                m.push(name, c.clone());
            }
            for (name, c) in extra {
                m.push(name, c.clone());
            }
            m
        };
        let specs: Vec<(&str, Vec<&(&str, Vec<f64>)>)> = vec![
            ("baseline", vec![]),
            ("+ surprisal (full reading)", vec![&surp_full]),
            ("+ surprisal (attention)", vec![&surp_att]),
            ("+ both surprisals", vec![&surp_full, &surp_att]),
        ];
        let mut fit_err = None;
        let mut models = Vec::new();
        let mut coefficients = Vec::new();
        let mut baseline_ll = f64::NAN;
        for (label, extra) in &specs {
            match ols_regression(&y, &matrix(extra)) {
                Ok(fit) => {
                    if *label == "baseline" {
                        baseline_ll = fit.log_likelihood;
                    }
                    models.push(RegressionModelRow {
                        label: label.to_string(),
                        log_likelihood: fit.log_likelihood,
                        deviance_vs_baseline: deviance(fit.log_likelihood, baseline_ll),
                    });
                    // The baseline row reports its whole coefficient table;
                    // extended rows only what they add.
                    let added: Vec<&str> = extra.iter().map(|(name, _)| *name).collect();
                    for (i, name) in fit.names.iter().enumerate() {
                        if *label == "baseline" || added.iter().any(|a| a == name) {
                            coefficients.push(RegressionCoefRow {
                                model: label.to_string(),
                                name: name.clone(),
                                coef: fit.coef[i],
                                std_err: fit.std_err[i],
                                t_value: fit.t_value[i],
                            });
                        }
                    }
                }
                Err(e) => {
                    fit_err = Some(format!("duration regression `{label}` failed: {e}"));
                    break;
                }
            }
        }
        if lacked_covariates > 0 {
            notes.push(format!(
                "{lacked_covariates} fixated points lacked regression covariates and were dropped"
            ));
        }
        notes.push(format!(
            "duration regression uses {} of {} evaluation points ({} were never fixated)",
            reg_points.len(),
            points.len(),
            never_fixated
        ));
        match fit_err {
            Some(msg) => {
                notes.push(msg);
                None
            }
            None => Some(RegressionReport {
                n: reg_points.len(),
                baseline_log_likelihood: baseline_ll,
                models,
                coefficients,
            }),
        }
    };

    // Correlations at the evaluation points.
    let mut corr_rows = Vec::new();
    for (predictor, values) in [
        ("word length", &p_len),
        ("log frequency", &p_logf),
        ("surprisal (full reading)", &p_full),
        ("surprisal (attention)", &p_greedy),
        ("attention probability", &p_prob),
    ] {
        push_correlation(&mut corr_rows, &mut notes, "human", predictor, &p_human, values);
    }
    for (predictor, values) in [("word length", &p_len), ("log frequency", &p_logf)] {
        push_correlation(&mut corr_rows, &mut notes, "attention", predictor, &p_prob, values);
    }

    // Fixation probability by part of speech, human vs model.
    let tags: Vec<PosTag> = points.iter().map(|&k| data.records[k].pos_tag).collect();
    let pos = match (pos_table(&tags, &p_human), pos_table(&tags, &p_prob)) {
        (Ok(hrows), Ok(mrows)) => {
            let cmp = pos_compare(&hrows, &mrows)?;
            let rows = hrows
                .iter()
                .map(|hr| {
                    let mr = mrows.iter().find(|r| r.tag == hr.tag).expect("same tag set");
                    PosCompareRow {
                        tag: hr.tag.label().to_string(),
                        count: hr.count,
                        human_pct: hr.mean_prob_pct,
                        model_pct: mr.mean_prob_pct,
                        human_rank: hr.rank,
                        model_rank: mr.rank,
                    }
                })
                .collect();
            Some(PosReport {
                rows,
                mse: cmp.mse,
                pearson: cmp.pearson,
                spearman: cmp.spearman,
            })
        }
        (Err(e), _) | (_, Err(e)) => {
            notes.push(format!("part-of-speech table skipped: {e}"));
            None
        }
    };

    // Conditional fixation: P(fixate | previous fixated) / P(fixate).
    // Human masks run over whole documents per reader; model and random
    // masks over the evaluation windows.
    let mut conditional = Vec::new();
    let mut human_masks: Vec<Vec<Option<bool>>> = Vec::new();
    for &doc in &data.doc_ids {
        for r in 0..data.n_readers {
            human_masks.push(
                data.records
                    .iter()
                    .filter(|rec| rec.doc_id == doc)
                    .map(|rec| rec.fixations[r])
                    .collect(),
            );
        }
    }
    let cond_entries = [
        ("human readers", conditional_fixation_ratio(&human_masks)),
        (
            "attention (greedy)",
            conditional_fixation_ratio_known(
                &runs.iter().map(|o| o.greedy_omega.clone()).collect::<Vec<_>>(),
            ),
        ),
        (
            "random, rate-matched",
            conditional_fixation_ratio_known(
                &runs.iter().map(|o| o.random_omega.clone()).collect::<Vec<_>>(),
            ),
        ),
    ];
    for (label, c) in cond_entries {
        match c {
            Some(c) => conditional.push(ConditionalRow {
                label: label.to_string(),
                conditional: c.conditional,
                marginal: c.marginal,
                ratio: c.ratio,
                pairs: c.pairs,
            }),
            None => notes.push(format!("conditional fixation ratio for {label} is undefined")),
        }
    }

    let report = EvalReport {
        seed,
        config_hash: ckpt.meta.config_hash.clone(),
        fixation_target: target,
        evaluation_points: points.len(),
        perplexity: perplexity_rows,
        prediction,
        fixation_likelihood,
        regression,
        correlations: corr_rows,
        pos,
        conditional_fixation: conditional,
        notes,
    };

    let json = report.to_json()?;
    std::fs::write(&cfg.paths.report_json, &json).map_err(|e| Error::Io {
        path: cfg.paths.report_json.clone(),
        source: e,
    })?;
    let text = report.render_text();
    std::fs::write(&cfg.paths.report_text, &text).map_err(|e| Error::Io {
        path: cfg.paths.report_text.clone(),
        source: e,
    })?;
    print!("{text}");
    println!(
        "wrote {} and {}",
        cfg.paths.report_json.display(),
        cfg.paths.report_text.display()
    );
    Ok(())
}

/// Adapter from the metric struct to a report row; the label is filled by
/// the caller via struct update.
fn likelihood_row(lik: neat_core::eval::FixationLikelihood) -> LikelihoodRow {
    LikelihoodRow {
        label: String::new(),
        perplexity: lik.perplexity,
        cross_entropy_bits: lik.cross_entropy_bits,
        decisions: lik.decisions,
    }
}
