//! Command-line driver: motif decomposition, distance pre-training, affinity
//! fine-tuning, evaluation and prediction.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hiercpi::synth::SynthOptions;

use crate::commands::Init;
use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult, ExitKind};

#[derive(Debug, Parser)]
#[command(name = "hiercpi", version, about = "Hierarchical compound-protein interaction model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split molecules into motifs and summarise the result.
    Decompose {
        #[arg(long)]
        compound: Option<PathBuf>,
        #[arg(long)]
        protein: Option<PathBuf>,
        /// Write both motif graphs as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-supervised distance pre-training.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the affinity head and encoders on labeled complexes.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        /// `scratch` or a checkpoint path; defaults to paths.init_checkpoint.
        #[arg(long)]
        init: Option<String>,
    },
    /// RMSE and Pearson correlation of a checkpoint on a labeled manifest.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted pKa for one compound/protein pair.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        compound: PathBuf,
        #[arg(long)]
        protein: PathBuf,
        /// Directory for the predicted atom and motif distance matrices.
        #[arg(long)]
        dump_distances: Option<PathBuf>,
    },
    /// Generate a synthetic labeled dataset.
    #[command(hide = true)]
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
        compound_atoms: Option<Vec<usize>>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
        protein_atoms: Option<Vec<usize>>,
    },
}

/// Runs one command, printing results to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Decompose { compound, protein, out } => {
            for line in commands::decompose(compound.as_deref(), protein.as_deref(), out.as_deref())? {
                println!("{line}");
            }
        }
        Command::Pretrain { config } => {
            let s = commands::pretrain(&RunConfig::load(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serialises"));
        }
        Command::Finetune { config, init } => {
            let s = commands::finetune(&RunConfig::load(&config)?, init.as_deref().map(Init::parse))?;
            let last = s.epochs.last();
            println!(
                "{}",
                serde_json::json!({
                    "complexes": s.complexes,
                    "skipped": s.skipped,
                    "epochs": s.epochs.len(),
                    "last": last,
                    "csv": s.csv,
                    "checkpoint": s.checkpoint,
                })
            );
        }
        Command::Evaluate { checkpoint, manifest, out } => {
            let r = commands::evaluate(&checkpoint, &manifest, out.as_deref())?;
            println!("{}", serde_json::to_string(&r).expect("report serialises"));
        }
        Command::Predict { checkpoint, compound, protein, dump_distances } => {
            let r = commands::predict(&checkpoint, &compound, &protein, dump_distances.as_deref())?;
            println!("{}\t{}", r.id, r.pka);
        }
        Command::Synth { out, count, seed, compound_atoms, protein_atoms } => {
            let mut opts = SynthOptions::default();
            if let Some(v) = compound_atoms {
                opts.compound_atoms = (v[0], v[1]);
            }
            if let Some(v) = protein_atoms {
                opts.protein_atoms = (v[0], v[1]);
            }
            println!("{}", commands::synth(&out, count, seed, &opts)?.display());
        }
    }
    Ok(())
}
