//! `taste` command-line front end.
//!
//! Exit codes: 0 on success, 2 on bad flags, paths or inputs, 1 when a
//! solver fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;

#[derive(Parser, Debug)]
#[command(name = "taste", version, about = "Coupled nonnegative PARAFAC2 and static-feature factorization")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit factors to a dataset directory.
    Fit(FitArgs),
    /// Generate a synthetic dataset plus its ground-truth factors.
    Synth(SynthArgs),
    /// Score new entities against trained phenotypes.
    Project(ProjectArgs),
    /// Report fit metrics for a factors directory.
    Eval(EvalArgs),
    /// Write the personalized phenotype scores of a factors directory.
    ExportFeatures(ExportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Taste,
    CopaPlus,
}

#[derive(Args, Debug)]
struct ThreadArgs {
    /// Worker threads (0 = all available cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: PathBuf,
    /// Number of phenotypes.
    #[arg(long, value_parser = positive)]
    rank: usize,
    /// Weight of the static matrix term.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Weight of the uniqueness term.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Relative objective change that stops the fit.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Taste)]
    method: Method,
    /// Output factors directory; the sweep log is written inside it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory; receives `data/` and `truth/`.
    #[arg(long)]
    out: PathBuf,
    /// Number of entities.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Temporal features.
    #[arg(long, default_value_t = 30)]
    j: usize,
    /// Static features.
    #[arg(long, default_value_t = 20)]
    p: usize,
    /// Rows per entity.
    #[arg(long, default_value_t = 100)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    /// Fraction of cells that receive noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Standard deviation of the noise.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// Dataset with the new entities.
    #[arg(long)]
    data: PathBuf,
    /// Trained factors directory.
    #[arg(long)]
    factors: PathBuf,
    /// Output score table.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the trained static weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Overrides the trained uniqueness weight.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    factors: PathBuf,
    /// Ground-truth factors to compare against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    factors: PathBuf,
    /// Output score table.
    #[arg(long)]
    out: PathBuf,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Solver(String),
}

impl From<taste::Error> for Failure {
    fn from(e: taste::Error) -> Self {
        match e {
            taste::Error::Nnls(_) | taste::Error::Diverged { .. } => Failure::Solver(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Synth(a) => commands::synth(a),
        Command::Project(a) => commands::project(a),
        Command::Eval(a) => commands::eval(a),
        Command::ExportFeatures(a) => commands::export_features(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(1)
        }
    }
}
