//! Helpers shared by the pipeline commands.

use crate::config::{config_hash, file_fingerprint, RunConfig};
use neat_core::checkpoint::LoadedCheckpoint;
use neat_core::corpus::{EyeTrackData, TokenSequence, Vocabulary};
use neat_core::model::ModelParams;
use neat_core::training::ProgressRecord;
use neat_core::value::ValueParams;
use neat_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Model (and value network, if present) rebuilt from a checkpoint.
pub fn restore_model(ckpt: &LoadedCheckpoint) -> Result<(ModelParams<f64>, Option<ValueParams<f64>>)> {
    // The init draw is immediately overwritten by the checkpoint values;
    // any seed works.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = ModelParams::<f64>::init(ckpt.model.clone(), 0.01, &mut rng)?;
    ckpt.restore("model", &mut model)?;
    let value = if ckpt.has_section("value") {
        let mut v = ValueParams::<f64>::init(&ckpt.model, 0.01, &mut rng);
        ckpt.restore("value", &mut v)?;
        Some(v)
    } else {
        None
    };
    Ok((model, value))
}

/// Fails unless the checkpoint was produced for this config's architecture
/// and the exact vocabulary file on disk.
pub fn verify_checkpoint(ckpt: &LoadedCheckpoint, cfg: &RunConfig, vocab: &Vocabulary) -> Result<()> {
    let expected = config_hash(&cfg.model.to_model_config(vocab));
    if ckpt.meta.config_hash != expected {
        return Err(Error::Config(format!(
            "checkpoint was trained for architecture {} but the current \
             config and vocabulary give {}; retrain or fix the config",
            ckpt.meta.config_hash, expected
        )));
    }
    let fp = file_fingerprint(&cfg.paths.vocab)?;
    if ckpt.meta.vocab_fingerprint != fp {
        return Err(Error::Config(format!(
            "checkpoint is tied to vocabulary {} but {} has fingerprint {}",
            ckpt.meta.vocab_fingerprint,
            cfg.paths.vocab.display(),
            fp
        )));
    }
    Ok(())
}

pub fn require_phase(ckpt: &LoadedCheckpoint, phase: &str, path: &Path) -> Result<()> {
    if ckpt.meta.phase != phase {
        return Err(Error::Config(format!(
            "{} holds a `{}` checkpoint, expected `{phase}`",
            path.display(),
            ckpt.meta.phase
        )));
    }
    Ok(())
}

/// Applies the configured case normalization to eye-tracking words so they
/// match the vocabulary built from the training corpus.
pub fn normalize_words(data: &mut EyeTrackData, lowercase: bool) {
    if !lowercase {
        return;
    }
    for rec in &mut data.records {
        rec.word = rec.word.to_lowercase();
    }
}

/// Complete length-n windows over each document of the eye-tracking corpus,
/// in document order. Window starts index into the document's tokens, which
/// equals the records' token_idx values.
pub fn eyetrack_windows(
    data: &EyeTrackData,
    vocab: &Vocabulary,
    n: usize,
) -> Result<Vec<TokenSequence>> {
    let mut out = Vec::new();
    for &doc in &data.doc_ids {
        let ids: Vec<u32> = data
            .records
            .iter()
            .filter(|r| r.doc_id == doc)
            .map(|r| vocab.id(&r.word))
            .collect();
        if ids.len() >= n {
            out.extend(neat_core::corpus::chunk_sequences(doc, &ids, n)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!(
            "no document in the eye-tracking corpus reaches the sequence \
             length {n}"
        )));
    }
    Ok(out)
}

/// Index of a document's first record, per doc id, for turning
/// (doc, token_idx) into a position in `data.records`.
pub fn doc_offsets(data: &EyeTrackData) -> std::collections::HashMap<u32, usize> {
    let mut map = std::collections::HashMap::new();
    for (k, rec) in data.records.iter().enumerate() {
        map.entry(rec.doc_id).or_insert(k);
    }
    map
}

/// Deterministic per-window generator, independent of iteration order and
/// thread count.
pub fn window_rng(seed: u64, doc_id: u32, start: u32) -> ChaCha8Rng {
    let mut x = seed
        ^ (doc_id as u64).wrapping_mul(0x9e3779b97f4a7c15)
        ^ (start as u64).wrapping_mul(0xd1b54a32d192ed03);
    // splitmix64 finalizer, so neighboring windows decorrelate
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    ChaCha8Rng::seed_from_u64(x ^ (x >> 31))
}

/// Progress printer for the train commands: one line per epoch boundary
/// and every 25th batch.
pub fn progress_printer(quiet: bool) -> impl FnMut(&ProgressRecord) {
    let mut last_epoch = usize::MAX;
    move |r: &ProgressRecord| {
        if quiet {
            return;
        }
        if r.epoch != last_epoch || r.batch % 25 == 0 {
            last_epoch = r.epoch;
            println!(
                "phase {} epoch {:>3} batch {:>5}  cost {:>10.4}  fixation rate {:.3}  entropy {:.3}",
                r.phase, r.epoch, r.batch, r.mean_cost, r.fixation_rate, r.mean_entropy
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_rngs_differ_across_windows_and_match_across_calls() {
        use rand::RngCore;
        let mut a = window_rng(7, 0, 0);
        let mut b = window_rng(7, 0, 20);
        let mut c = window_rng(7, 1, 0);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        assert_eq!(x, window_rng(7, 0, 0).next_u64());
    }
}
