//! Turns the raw training corpus into a vocabulary and fixed-length
//! training sequences.

use crate::config::RunConfig;
use neat_core::corpus::{chunk_sequences, save_sequences, tokenize, Vocabulary};
use neat_core::{Error, Result};

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    let text = std::fs::read_to_string(&cfg.paths.corpus).map_err(|e| Error::Io {
        path: cfg.paths.corpus.clone(),
        source: e,
    })?;
    let docs: Vec<Vec<String>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| tokenize(l, cfg.model.lowercase))
        .collect();
    if docs.is_empty() {
        return Err(Error::Empty("training corpus"));
    }

    let vocab = Vocabulary::build(
        docs.iter().flat_map(|d| d.iter()),
        cfg.model.vocab_words,
    )?;
    vocab.save(&cfg.paths.vocab)?;

    let mut seqs = Vec::new();
    let mut total_tokens = 0usize;
    let mut oov_tokens = 0usize;
    for (doc_id, doc) in docs.iter().enumerate() {
        let ids = vocab.encode(doc.iter());
        total_tokens += ids.len();
        oov_tokens += ids.iter().filter(|&&id| id == vocab.oov_id()).count();
        seqs.extend(chunk_sequences(doc_id as u32, &ids, cfg.model.sequence_len)?);
    }
    if seqs.is_empty() {
        return Err(Error::Data(format!(
            "no document reaches the sequence length {}; shorten \
             model.sequence_len or provide longer documents",
            cfg.model.sequence_len
        )));
    }
    save_sequences(&cfg.paths.sequences, &seqs)?;

    println!(
        "vocabulary: {} word types (+ markers) over {} tokens -> {}",
        vocab.n_words(),
        total_tokens,
        cfg.paths.vocab.display()
    );
    println!(
        "sequences: {} windows of length {} from {} documents \
         ({:.2}% unknown words) -> {}",
        seqs.len(),
        cfg.model.sequence_len,
        docs.len(),
        100.0 * oov_tokens as f64 / total_tokens as f64,
        cfg.paths.sequences.display()
    );
    Ok(())
}
