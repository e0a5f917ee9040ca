//! Command-line pipeline around the reading model: synthesize or prepare
//! data, train both phases, then simulate, evaluate and visualize.

mod commands;
mod config;
mod util;

use clap::{Parser, Subcommand};
use commands::gen_data::GenDataOpts;
use commands::heatmap::HeatSource;
use commands::simulate::SimSource;
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "neat",
    about = "Train and evaluate a reading model that learns what to skip",
    version
)]
struct Cli {
    /// Worker threads for simulation and evaluation. 0 = all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a starter config file.
    InitConfig {
        /// Where to put it.
        #[arg(default_value = "run.toml")]
        path: PathBuf,
        /// Use the expensive preset (10k vocabulary, 1000-cell networks,
        /// length-50 sequences) instead of the quick desk-sized one.
        #[arg(long)]
        full_scale: bool,
    },
    /// Generate a synthetic corpus plus simulated eye-tracking data.
    GenData {
        #[arg(long, short)]
        config: PathBuf,
        /// Seed for the data generator (independent of training seeds).
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Training documents.
        #[arg(long, default_value_t = 60)]
        docs: usize,
        /// Word pairs per document (two tokens each).
        #[arg(long, default_value_t = 200)]
        pairs_per_doc: usize,
        /// Held-out documents for the eye-tracking file.
        #[arg(long, default_value_t = 6)]
        eyetrack_docs: usize,
        /// Simulated readers.
        #[arg(long, default_value_t = 10)]
        readers: usize,
        /// Fixation probability multiplier after a fixated word; 1 = none.
        #[arg(long, default_value_t = 0.85)]
        repel: f64,
        /// Chance a function word is drawn at random instead of paired.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Build the vocabulary and token sequences from the corpus.
    Prepare {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Phase 1: train reader, decoder and embeddings under random masks.
    TrainLm {
        #[arg(long, short)]
        config: PathBuf,
        /// Override the training seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress per-batch progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Phase 2: train the attention policy against the frozen model.
    TrainAttention {
        #[arg(long, short)]
        config: PathBuf,
        /// Override the training seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress per-batch progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Record the model's greedy reading of a corpus as a TSV.
    Simulate {
        #[arg(long, short)]
        config: PathBuf,
        /// Checkpoint to simulate; defaults to the attention checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Which text to read.
        #[arg(long, value_enum, default_value_t = SimSource::Corpus)]
        over: SimSource,
        /// Output path; defaults to the config's simulation path.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Score the model against the eye-tracking corpus and write the report.
    Evaluate {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Render one document's fixation probabilities as an HTML page.
    Heatmap {
        #[arg(long, short)]
        config: PathBuf,
        /// Whose probabilities to draw.
        #[arg(long, value_enum, default_value_t = HeatSource::Model)]
        source: HeatSource,
        /// Document id to render.
        #[arg(long, default_value_t = 0)]
        doc: u32,
        /// Simulation TSV to read; defaults to the config's simulation path.
        #[arg(long)]
        sim: Option<PathBuf>,
        /// Output path; defaults to the config's heatmap path.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> neat_core::Result<()> {
    match cli.command {
        Command::InitConfig { path, full_scale } => {
            let cfg = if full_scale {
                RunConfig::full_scale()
            } else {
                RunConfig::default()
            };
            cfg.save(&path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::GenData {
            config,
            seed,
            docs,
            pairs_per_doc,
            eyetrack_docs,
            readers,
            repel,
            noise,
        } => {
            let cfg = RunConfig::load(&config)?;
            let opts = GenDataOpts {
                seed,
                docs,
                pairs_per_doc,
                eyetrack_docs,
                readers,
                repel,
                noise,
            };
            commands::gen_data::gen_data(&cfg, &opts)
        }
        Command::Prepare { config } => {
            let cfg = RunConfig::load(&config)?;
            commands::prepare::prepare(&cfg)
        }
        Command::TrainLm {
            config,
            seed,
            quiet,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            commands::train::train_lm(&cfg, quiet)
        }
        Command::TrainAttention {
            config,
            seed,
            quiet,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            commands::train::train_attention(&cfg, quiet)
        }
        Command::Simulate {
            config,
            checkpoint,
            over,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::simulate::simulate(&cfg, checkpoint.as_deref(), over, out.as_deref())
        }
        Command::Evaluate { config } => {
            let cfg = RunConfig::load(&config)?;
            commands::evaluate::evaluate(&cfg)
        }
        Command::Heatmap {
            config,
            source,
            doc,
            sim,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::heatmap::heatmap(&cfg, source, doc, sim.as_deref(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // A second build_global in the same process is an error we can
        // ignore; the pool is already sized.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
