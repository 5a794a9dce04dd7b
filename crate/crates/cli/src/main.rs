//! `estent`: runs entropy, bounds, simulation and sweep experiments from a
//! JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use estent_core::experiment::{cmd_bounds, cmd_entropy, cmd_simulate, cmd_sweep, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "estent", version, about = "Entropy and capacity experiments for state estimation over noisy channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate entropy rates; writes entropy_counts.csv and entropy_summary.json.
    Entropy(Common),
    /// Evaluate capacity and rate bounds; writes bounds.json (and ar_rd_curve.csv).
    Bounds(Common),
    /// Run a coding scheme over a channel; writes objective_report.json (and traces.csv).
    Simulate(Common),
    /// Sweep channel capacities; writes sweep.csv and sweep.json.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Directory for output files (overrides the config).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Master seed (overrides ESTENT_SEED and the config).
    #[arg(long, env = "ESTENT_SEED")]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

type CommandFn = fn(&ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, ExperimentError> {
    let (common, cmd): (&Common, CommandFn) = match &cli.command {
        Command::Entropy(c) => (c, cmd_entropy),
        Command::Bounds(c) => (c, cmd_bounds),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Sweep(c) => (c, cmd_sweep),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(ExperimentError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Runtime(e.to_string()))?;
    }
    let config = ExperimentConfig::from_path(&common.config)?.resolve(common.seed, None, common.output_dir.clone())?;
    cmd(&config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("estent: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
