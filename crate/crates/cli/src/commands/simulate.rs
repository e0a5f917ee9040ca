//! Runs the trained model over text deterministically and records its
//! reading behavior, one row per token.

use crate::config::RunConfig;
use crate::util::{eyetrack_windows, normalize_words, require_phase, restore_model, verify_checkpoint};
use neat_core::corpus::{load_eyetrack, load_sequences, TokenSequence, Vocabulary};
use neat_core::model::ModelParams;
use neat_core::{Error, Result};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimSource {
    /// The prepared training sequences.
    Corpus,
    /// The eye-tracking corpus text.
    Eyetrack,
}

pub const SIM_COLUMNS: [&str; 7] = [
    "doc_id",
    "token_idx",
    "word",
    "fixation_prob",
    "omega",
    "restricted_nll",
    "full_nll",
];

/// One token of a simulation run.
#[derive(Debug, Clone)]
pub struct SimRow {
    pub doc_id: u32,
    pub token_idx: usize,
    pub word: String,
    pub fixation_prob: f64,
    pub fixated: bool,
    /// Reader surprisal under the model's own (greedy) mask.
    pub restricted_nll: f64,
    /// Reader surprisal with every word fixated.
    pub full_nll: f64,
}

fn window_rows(
    model: &ModelParams<f64>,
    vocab: &Vocabulary,
    w: &TokenSequence,
) -> Result<Vec<SimRow>> {
    let greedy = model.reader_greedy(&w.ids)?;
    let full = model.reader_drive(&w.ids, &vec![true; w.ids.len()])?;
    Ok((0..w.ids.len())
        .map(|i| SimRow {
            doc_id: w.doc_id,
            token_idx: w.start + i,
            word: vocab.word(w.ids[i]).to_string(),
            fixation_prob: greedy.mask.probs[i],
            fixated: greedy.mask.omega[i],
            restricted_nll: greedy.nll[i],
            full_nll: full.nll[i],
        })
        .collect())
}

pub fn simulate(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    source: SimSource,
    out: Option<&Path>,
) -> Result<()> {
    let vocab = Vocabulary::load(&cfg.paths.vocab)?;
    let ckpt_path: PathBuf = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.paths.attention_checkpoint.clone());
    let ckpt = neat_core::checkpoint::load_checkpoint(&ckpt_path)?;
    require_phase(&ckpt, "attention", &ckpt_path)?;
    verify_checkpoint(&ckpt, cfg, &vocab)?;
    let (model, _) = restore_model(&ckpt)?;

    let windows: Vec<TokenSequence> = match source {
        SimSource::Corpus => load_sequences(&cfg.paths.sequences)?,
        SimSource::Eyetrack => {
            let mut data = load_eyetrack(&cfg.paths.eyetrack)?;
            normalize_words(&mut data, cfg.model.lowercase);
            eyetrack_windows(&data, &vocab, model.config.sequence_len)?
        }
    };
    if windows.is_empty() {
        return Err(Error::Empty("simulation input sequences"));
    }

    // Greedy reading is deterministic, so parallel evaluation with ordered
    // collection reproduces the sequential output byte for byte.
    let per_window: Vec<Vec<SimRow>> = windows
        .par_iter()
        .map(|w| window_rows(&model, &vocab, w))
        .collect::<Result<_>>()?;

    let source_tag = match source {
        SimSource::Corpus => "corpus",
        SimSource::Eyetrack => "eyetrack",
    };
    let mut body = String::new();
    body.push_str(&format!("# seed\t{}\n", ckpt.meta.seed));
    body.push_str(&format!("# config\t{}\n", ckpt.meta.config_hash));
    body.push_str(&format!("# source\t{source_tag}\n"));
    body.push_str(&SIM_COLUMNS.join("\t"));
    body.push('\n');
    let mut fixated = 0usize;
    let mut total = 0usize;
    for rows in &per_window {
        for r in rows {
            total += 1;
            if r.fixated {
                fixated += 1;
            }
            body.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.doc_id,
                r.token_idx,
                r.word,
                r.fixation_prob,
                u8::from(r.fixated),
                r.restricted_nll,
                r.full_nll
            ));
        }
    }

    let out_path: PathBuf = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.paths.simulation.clone());
    std::fs::write(&out_path, &body).map_err(|e| Error::Io {
        path: out_path.clone(),
        source: e,
    })?;
    println!(
        "simulated {} tokens over {source_tag} text, fixation rate {:.3} -> {}",
        total,
        fixated as f64 / total as f64,
        out_path.display()
    );
    Ok(())
}

/// Reads a simulation TSV back. Used by the heatmap command and tests.
pub fn read_simulation(path: &Path) -> Result<Vec<SimRow>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in body.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            column: column.into(),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !saw_header {
            if fields != SIM_COLUMNS {
                return Err(err("header", format!("expected {}", SIM_COLUMNS.join(", "))));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != SIM_COLUMNS.len() {
            return Err(err(
                "row",
                format!("expected {} fields, got {}", SIM_COLUMNS.len(), fields.len()),
            ));
        }
        let f64_field = |idx: usize| -> Result<f64> {
            fields[idx]
                .parse()
                .map_err(|_| err(SIM_COLUMNS[idx], format!("invalid number `{}`", fields[idx])))
        };
        rows.push(SimRow {
            doc_id: fields[0]
                .parse()
                .map_err(|_| err("doc_id", format!("invalid doc id `{}`", fields[0])))?,
            token_idx: fields[1]
                .parse()
                .map_err(|_| err("token_idx", format!("invalid index `{}`", fields[1])))?,
            word: fields[2].to_string(),
            fixation_prob: f64_field(3)?,
            fixated: match fields[4] {
                "0" => false,
                "1" => true,
                other => return Err(err("omega", format!("expected 0 or 1, got `{other}`"))),
            },
            restricted_nll: f64_field(5)?,
            full_nll: f64_field(6)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("simulation file"));
    }
    Ok(rows)
}
