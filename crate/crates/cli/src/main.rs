//! `sci`: batch front door over the toolkit. Three commands, no
//! interactive mode: every invocation reads its configuration, computes,
//! writes or prints the result, and exits.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 computation
//! error. Identical configuration produces byte-identical artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod check;
mod config;
mod demos;
mod pseudospectrum;

/// A failure, already sorted by which exit code it deserves.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag value, malformed file, missing field: exit 2.
    Config(String),
    /// A module refused the request or an artifact could not be written:
    /// exit 3.
    Compute(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn compute(msg: impl Into<String>) -> Self {
        CliError::Compute(msg.into())
    }
}

#[derive(Parser)]
#[command(
    name = "sci",
    about = "Pseudospectrum towers, computability demos, finite-problem checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tower of threshold maps and write per-stage artifacts.
    Pseudospectrum(PseudospectrumArgs),
    /// Run a self-contained demonstration and print its report.
    Demo(DemoArgs),
    /// Check a finite problem file for consistency and factorizations.
    Check(CheckArgs),
}

#[derive(Args)]
struct PseudospectrumArgs {
    /// rotation:<p/q>, doubling, identity, or affine:<file.csv>
    #[arg(long)]
    map: Option<String>,
    /// Threshold; must be positive.
    #[arg(long)]
    eps: Option<f64>,
    /// Comma-separated n2:n1 pairs, strictly increasing in both parts.
    #[arg(long)]
    schedule: Option<String>,
    /// Grid half-width (default 2).
    #[arg(long)]
    half_width: Option<f64>,
    /// Test-to-trial dictionary ratio (default 2).
    #[arg(long)]
    test_ratio: Option<u32>,
    /// Artifact directory; created if missing (default sci-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in the resolved config; towers are deterministic anyway.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of csv,json,svg (default csv,json).
    #[arg(long)]
    format: Option<String>,
    /// JSON file supplying any of the fields above; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// One of sgn-gap, weak-hansen, lim-stages.
    name: String,
    /// Seed for demos that draw random instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Finite problem JSON document.
    file: PathBuf,
    /// Also attempt the fixed-batch factorization through these
    /// evaluation indices.
    #[arg(long, value_delimiter = ',')]
    queries: Option<Vec<usize>>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Pseudospectrum(args) => pseudospectrum::run(args),
        Command::Demo(args) => demos::run(&args),
        Command::Check(args) => check::run(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
