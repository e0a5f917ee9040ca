//! The two training commands: language model (reader, decoder, embeddings)
//! under random masks, then the attention policy against the frozen model.

use crate::config::{config_hash, file_fingerprint, RunConfig};
use crate::util::{progress_printer, require_phase, restore_model, verify_checkpoint};
use neat_core::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use neat_core::corpus::{load_sequences, Vocabulary};
use neat_core::model::ModelParams;
use neat_core::training::{train_phase1, train_phase2};
use neat_core::value::ValueParams;
use neat_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Init streams get their own salts so neither shares draws with the
// training loops, which derive theirs from the same seed.
const MODEL_INIT_SALT: u64 = 0x243f6a8885a308d3;
const VALUE_INIT_SALT: u64 = 0x452821e638d01377;

fn load_ids(cfg: &RunConfig) -> Result<Vec<Vec<u32>>> {
    let seqs = load_sequences(&cfg.paths.sequences)?;
    Ok(seqs.into_iter().map(|s| s.ids).collect())
}

pub fn train_lm(cfg: &RunConfig, quiet: bool) -> Result<()> {
    let vocab = Vocabulary::load(&cfg.paths.vocab)?;
    let ids = load_ids(cfg)?;
    let mconfig = cfg.model.to_model_config(&vocab);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed ^ MODEL_INIT_SALT);
    let mut model = ModelParams::<f64>::init(mconfig.clone(), cfg.train.init_bound, &mut rng)?;

    let mut printer = progress_printer(quiet);
    let stats = train_phase1(&mut model, &ids, &cfg.train, Some(&mut printer))?;

    let meta = CheckpointMeta {
        seed: cfg.train.seed,
        config_hash: config_hash(&mconfig),
        phase: "lm".into(),
        vocab_fingerprint: file_fingerprint(&cfg.paths.vocab)?,
    };
    save_checkpoint(
        &cfg.paths.lm_checkpoint,
        &meta,
        &mconfig,
        &cfg.train,
        &[("model", &model)],
    )?;
    println!(
        "phase 1 done: {} batches, final cost {:.4} -> {}",
        stats.batches,
        stats.final_mean_cost,
        cfg.paths.lm_checkpoint.display()
    );
    Ok(())
}

pub fn train_attention(cfg: &RunConfig, quiet: bool) -> Result<()> {
    let vocab = Vocabulary::load(&cfg.paths.vocab)?;
    let ids = load_ids(cfg)?;

    let ckpt = load_checkpoint(&cfg.paths.lm_checkpoint)?;
    require_phase(&ckpt, "lm", &cfg.paths.lm_checkpoint)?;
    verify_checkpoint(&ckpt, cfg, &vocab)?;
    let (mut model, _) = restore_model(&ckpt)?;

    let mut vrng = ChaCha8Rng::seed_from_u64(cfg.train.seed ^ VALUE_INIT_SALT);
    let mut value = ValueParams::<f64>::init(&model.config, cfg.train.init_bound, &mut vrng);

    let mut printer = progress_printer(quiet);
    let stats = train_phase2(&mut model, &mut value, &ids, &cfg.train, Some(&mut printer))?;

    let meta = CheckpointMeta {
        seed: cfg.train.seed,
        config_hash: ckpt.meta.config_hash.clone(),
        phase: "attention".into(),
        vocab_fingerprint: ckpt.meta.vocab_fingerprint.clone(),
    };
    let mconfig = model.config.clone();
    save_checkpoint(
        &cfg.paths.attention_checkpoint,
        &meta,
        &mconfig,
        &cfg.train,
        &[("model", &model), ("value", &value)],
    )?;
    println!(
        "phase 2 done: {} batches, final cost {:.4}, fixation rate {:.3} -> {}",
        stats.batches,
        stats.final_mean_cost,
        stats.final_fixation_rate,
        cfg.paths.attention_checkpoint.display()
    );
    if stats.skipped_non_finite > 0 {
        println!(
            "note: {} episodes skipped for non-finite cost",
            stats.skipped_non_finite
        );
    }
    Ok(())
}
