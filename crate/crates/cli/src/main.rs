//! Experiment runner for the subsetmc toolkit.
//!
//! Subcommands: `sample`, `construct`, `exact`, `benchmark`, `synth-data`.
//! Configs are JSON files (or preset names); every tabular output is CSV
//! with a header row and each run directory gets a manifest with content
//! hashes. Exit codes: 0 success, 1 validation failure, 2 runtime failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subsetmc::data::SynthKind;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "subsetmc",
    about = "MCMC sampling experiments for discrete models over subsets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config file path or preset name (ising6, ising7, ising8,
    /// water-like, sensor-like, game-like).
    #[arg(long)]
    config: String,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config's out_dir, else "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-pool size (default: one per CPU).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// water-like, sensor-like, or game-like.
    #[arg(long)]
    kind: String,
    /// Ground-set size.
    #[arg(long)]
    n: usize,
    /// Coverage columns (facility families) or latent dimension (sensor).
    #[arg(long)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run chains for every configured sampler and write traces + PSRF curves.
    Sample(RunArgs),
    /// Construct proposal mixtures and write them (plus construction logs).
    Construct(RunArgs),
    /// Dense exact verification report (gaps, residuals, bounds).
    Exact(RunArgs),
    /// Per-step timing of Gibbs and the mixture chain across r.
    Benchmark(RunArgs),
    /// Synthesize a model and write it as JSON.
    SynthData(SynthArgs),
}

fn run(args: &RunArgs, f: impl Fn(&config::ExperimentConfig, &std::path::Path) -> Result<(), CliError>) -> Result<(), CliError> {
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(CliError::Validation("workers: must be at least 1".into()));
        }
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let mut config = config::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    f(&config, &out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(args) => run(args, commands::cmd_sample),
        Command::Construct(args) => run(args, commands::cmd_construct),
        Command::Exact(args) => run(args, commands::cmd_exact),
        Command::Benchmark(args) => run(args, commands::cmd_benchmark),
        Command::SynthData(args) => match args.kind.parse::<SynthKind>() {
            Ok(kind) => commands::cmd_synth_data(kind, args.n, args.l, args.seed, &args.out),
            Err(e) => Err(CliError::Validation(e)),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Validation(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Runtime(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
