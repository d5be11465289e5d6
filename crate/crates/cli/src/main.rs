//! `acoustic`: train and run the toolkit's pipelines on synthetic tasks or
//! supplied WAV/CSV files, writing CSV, WAV and parameter artifacts.
//!
//! Exit codes: 0 on success, 1 on configuration or invariant violations,
//! 2 on malformed WAV/CSV input.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::EmbedMethod;
use crate::output::{Ctx, InputError};

#[derive(Parser, Debug)]
#[command(name = "acoustic", version, about = "Acoustic learning toolkit")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Validate inputs and print the plan without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Worker threads for independent clips and seeds.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a mask network on tone-in-noise clips and enhance a clip.
    Denoise {
        /// Mono WAV to enhance instead of a generated probe clip.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train a PIT separator on comb mixtures and separate a mixture.
    Separate {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Estimate source azimuths with a 4-microphone circular array.
    Doa {
        /// Multichannel WAV recorded on the default array.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train a weak-label event detector and write frame decisions.
    Sed {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train a speaker extractor, enroll speakers and identify clips.
    Speaker {
        /// Mono WAVs to identify against the enrolled registry.
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Embed the rows of a CSV matrix in a low-dimensional scatter.
    Visualize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Option<EmbedMethod>,
    },
    /// Exact transport between two equally weighted point sets.
    Ot {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Train a toy diffusion model on 2-D clusters and sample from it.
    Diffuse,
    /// Finite-difference check of every differentiable op and loss.
    Gradcheck,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    let ctx = Ctx::new(&cfg, cli.seed, cli.out, cli.threads, cli.dry_run)?;
    match cli.command {
        Command::Denoise { input } => commands::denoise(&ctx, &cfg, input.as_deref()),
        Command::Separate { input } => commands::separate(&ctx, &cfg, input.as_deref()),
        Command::Doa { input } => commands::doa(&ctx, &cfg, input.as_deref()),
        Command::Sed { input } => commands::sed(&ctx, &cfg, input.as_deref()),
        Command::Speaker { input } => commands::speaker(&ctx, &cfg, &input),
        Command::Visualize { input, method } => commands::visualize(&ctx, &cfg, &input, method),
        Command::Ot { source, target } => commands::ot(&ctx, &source, &target),
        Command::Diffuse => commands::diffuse(&ctx, &cfg),
        Command::Gradcheck => commands::gradcheck(&ctx, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
