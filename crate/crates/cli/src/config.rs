//! One TOML file describes an experiment: where its files live, the model
//! architecture, training hyperparameters and evaluation settings.

use neat_core::corpus::Vocabulary;
use neat_core::model::{DecoderConditioning, ModelConfig, SkipMode};
use neat_core::training::TrainConfig;
use neat_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// All artifact locations. Relative paths are resolved against the
/// directory containing the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw training text, one document per line.
    pub corpus: PathBuf,
    /// Eye-tracking TSV used for evaluation.
    pub eyetrack: PathBuf,
    pub vocab: PathBuf,
    pub sequences: PathBuf,
    pub lm_checkpoint: PathBuf,
    pub attention_checkpoint: PathBuf,
    pub simulation: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub heatmap: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "corpus.txt".into(),
            eyetrack: "eyetrack.tsv".into(),
            vocab: "vocab.tsv".into(),
            sequences: "sequences.tsv".into(),
            lm_checkpoint: "lm.ckpt.json".into(),
            attention_checkpoint: "attention.ckpt.json".into(),
            simulation: "simulation.tsv".into(),
            report_json: "report.json".into(),
            report_text: "report.txt".into(),
            heatmap: "heatmap.html".into(),
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.eyetrack,
            &mut self.vocab,
            &mut self.sequences,
            &mut self.lm_checkpoint,
            &mut self.attention_checkpoint,
            &mut self.simulation,
            &mut self.report_json,
            &mut self.report_text,
            &mut self.heatmap,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }
}

/// User-settable architecture. Vocabulary size and the sequence-start id
/// are filled in from the prepared vocabulary, not set here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Keep this many word types; everything rarer becomes the unknown word.
    pub vocab_words: usize,
    pub embedding_dim: usize,
    pub reader_cells: usize,
    pub decoder_cells: usize,
    pub attention_hidden: usize,
    pub value_cells: usize,
    pub sequence_len: usize,
    pub skip_mode: SkipMode,
    pub decoder_conditioning: DecoderConditioning,
    /// Lowercase all text before building or applying the vocabulary.
    pub lowercase: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            vocab_words: 2000,
            embedding_dim: 32,
            reader_cells: 64,
            decoder_cells: 64,
            attention_hidden: 32,
            value_cells: 20,
            sequence_len: 20,
            skip_mode: SkipMode::Learned,
            decoder_conditioning: DecoderConditioning::StateInit,
            lowercase: true,
        }
    }
}

impl ModelSection {
    /// The preset for serious runs: single-layer 1000-cell reader and
    /// decoder, 100-dimensional embeddings, 10k word vocabulary, length-50
    /// sequences. Expect long CPU training times at this size.
    pub fn full_scale() -> Self {
        ModelSection {
            vocab_words: 10_000,
            embedding_dim: 100,
            reader_cells: 1000,
            decoder_cells: 1000,
            attention_hidden: 128,
            value_cells: 20,
            sequence_len: 50,
            ..ModelSection::default()
        }
    }

    pub fn to_model_config(&self, vocab: &Vocabulary) -> ModelConfig {
        ModelConfig {
            vocab_size: vocab.len(),
            embedding_dim: self.embedding_dim,
            reader_cells: self.reader_cells,
            decoder_cells: self.decoder_cells,
            attention_hidden: self.attention_hidden,
            value_cells: self.value_cells,
            sequence_len: self.sequence_len,
            bos_id: vocab.bos_id(),
            skip_mode: self.skip_mode,
            decoder_conditioning: self.decoder_conditioning,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Exclude this many positions at each end of every sequence window.
    pub boundary: usize,
    /// Seed for evaluation-time baselines (random masks etc.).
    pub seed: u64,
    /// Fixation rate for rate-matched comparisons; when absent, the
    /// observed human rate over the evaluation points is used.
    pub fixation_target: Option<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            boundary: 2,
            seed: 9,
            fixation_target: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn full_scale() -> Self {
        RunConfig {
            model: ModelSection::full_scale(),
            eval: EvalSection {
                boundary: 3,
                ..EvalSection::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: RunConfig = toml::from_str(&body)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.paths.resolve(base);
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize config: {e}")))?;
        std::fs::write(path, body).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let m = &self.model;
        for (name, v) in [
            ("vocab_words", m.vocab_words),
            ("embedding_dim", m.embedding_dim),
            ("reader_cells", m.reader_cells),
            ("decoder_cells", m.decoder_cells),
            ("attention_hidden", m.attention_hidden),
            ("value_cells", m.value_cells),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if m.sequence_len < 2 {
            return Err(Error::Config(format!(
                "model.sequence_len must be at least 2, got {}",
                m.sequence_len
            )));
        }
        if 2 * self.eval.boundary >= m.sequence_len {
            return Err(Error::Config(format!(
                "eval.boundary {} leaves no interior in sequences of length {}",
                self.eval.boundary, m.sequence_len
            )));
        }
        if let Some(t) = self.eval.fixation_target {
            if !(0.0 < t && t < 1.0) {
                return Err(Error::Config(format!(
                    "eval.fixation_target must be inside (0, 1), got {t}"
                )));
            }
        }
        if m.decoder_conditioning == DecoderConditioning::StateInit
            && m.reader_cells != m.decoder_cells
        {
            return Err(Error::Config(format!(
                "state-init decoder conditioning requires equal reader and \
                 decoder cells, got {} and {}",
                m.reader_cells, m.decoder_cells
            )));
        }
        Ok(())
    }
}

fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Identifies the architecture a checkpoint was trained for. Training
/// hyperparameters are recorded in the checkpoint itself and may vary
/// between phases, so they are deliberately not part of this hash.
pub fn config_hash(model: &ModelConfig) -> String {
    let body = serde_json::to_string(model).expect("model config serializes");
    hex16(&Sha256::digest(body.as_bytes()))
}

/// Content hash of a file, for tying checkpoints to the exact vocabulary.
pub fn file_fingerprint(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex16(&Sha256::digest(&bytes)))
}
