//! Renders fixation probabilities over one document as an HTML page.

use crate::commands::simulate::read_simulation;
use crate::config::RunConfig;
use crate::util::normalize_words;
use neat_core::corpus::load_eyetrack;
use neat_core::eval::{emit_heatmap, HeatToken};
use neat_core::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum HeatSource {
    /// Mean fixation indicators of the human readers.
    Human,
    /// The model's fixation probabilities from a simulation file.
    Model,
}

pub fn heatmap(
    cfg: &RunConfig,
    source: HeatSource,
    doc: u32,
    sim: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let (tokens, label) = match source {
        HeatSource::Human => {
            let mut data = load_eyetrack(&cfg.paths.eyetrack)?;
            normalize_words(&mut data, cfg.model.lowercase);
            let tokens: Vec<HeatToken> = data
                .records
                .iter()
                .filter(|r| r.doc_id == doc)
                .map(|r| HeatToken {
                    text: r.word.clone(),
                    prob: r.fixation_prob(),
                })
                .collect();
            (tokens, "human readers")
        }
        HeatSource::Model => {
            let sim_path: PathBuf = sim
                .map(Path::to_path_buf)
                .unwrap_or_else(|| cfg.paths.simulation.clone());
            let tokens: Vec<HeatToken> = read_simulation(&sim_path)?
                .into_iter()
                .filter(|r| r.doc_id == doc)
                .map(|r| HeatToken {
                    text: r.word,
                    prob: Some(r.fixation_prob),
                })
                .collect();
            (tokens, "attention model")
        }
    };
    if tokens.is_empty() {
        return Err(Error::Data(format!(
            "document {doc} has no tokens in the selected source"
        )));
    }
    let out_path: PathBuf = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.paths.heatmap.clone());
    let title = format!("Fixation probabilities, document {doc} ({label})");
    emit_heatmap(&tokens, &title, &out_path)?;
    println!("wrote {} ({} tokens)", out_path.display(), tokens.len());
    Ok(())
}
