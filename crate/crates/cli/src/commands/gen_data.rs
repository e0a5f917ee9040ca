//! Generates a self-contained synthetic dataset: a training corpus in the
//! pair language plus matching simulated eye-tracking data, written to the
//! paths named by the config.

use crate::config::RunConfig;
use neat_core::synthetic::{corpus_text, simulate_eyetrack, EyetrackSimConfig, PairLanguage};
use neat_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct GenDataOpts {
    pub seed: u64,
    pub docs: usize,
    pub pairs_per_doc: usize,
    pub eyetrack_docs: usize,
    pub readers: usize,
    /// Successive-fixation repulsion; 1.0 = independent decisions.
    pub repel: f64,
    /// Probability that a function word is not its content word's partner.
    pub noise: f64,
}

impl Default for GenDataOpts {
    fn default() -> Self {
        GenDataOpts {
            seed: 2024,
            docs: 60,
            pairs_per_doc: 200,
            eyetrack_docs: 6,
            readers: 10,
            repel: 0.85,
            noise: 0.05,
        }
    }
}

pub fn gen_data(cfg: &RunConfig, opts: &GenDataOpts) -> Result<()> {
    if opts.docs == 0 || opts.pairs_per_doc == 0 || opts.eyetrack_docs == 0 {
        return Err(Error::Config(
            "document and pair counts must be positive".into(),
        ));
    }
    let lang = PairLanguage::new(32, 8, opts.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let train_docs = lang.sample_documents(opts.docs, opts.pairs_per_doc, &mut rng);
    let text = corpus_text(&train_docs);
    std::fs::write(&cfg.paths.corpus, &text).map_err(|e| Error::Io {
        path: cfg.paths.corpus.clone(),
        source: e,
    })?;

    // Held-out documents for the eye-tracking side, from the same language.
    let eye_docs = lang.sample_documents(opts.eyetrack_docs, opts.pairs_per_doc, &mut rng);
    let sim = EyetrackSimConfig {
        n_readers: opts.readers,
        repel: opts.repel,
        missing_rate: 0.05,
    };
    let tsv = simulate_eyetrack(
        &eye_docs,
        &sim,
        &|w| lang.human_fixation_prob(w),
        &|w| lang.duration_mean(w),
        &|w| lang.pos_of(w),
        &mut rng,
    )?;
    std::fs::write(&cfg.paths.eyetrack, &tsv).map_err(|e| Error::Io {
        path: cfg.paths.eyetrack.clone(),
        source: e,
    })?;

    let train_tokens: usize = train_docs.iter().map(|d| d.len()).sum();
    let eye_tokens: usize = eye_docs.iter().map(|d| d.len()).sum();
    println!(
        "wrote {} ({} documents, {} tokens)",
        cfg.paths.corpus.display(),
        train_docs.len(),
        train_tokens
    );
    println!(
        "wrote {} ({} documents, {} tokens, {} simulated readers)",
        cfg.paths.eyetrack.display(),
        eye_docs.len(),
        eye_tokens,
        opts.readers
    );
    Ok(())
}
