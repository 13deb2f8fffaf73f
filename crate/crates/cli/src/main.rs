//! Batch pipeline driver: simulate ground truth, discover causes with the
//! learner ensemble, estimate effects, evaluate against truth, and render
//! reports. Every subcommand takes an optional JSON config file whose keys
//! mirror the flags one to one; explicit flags win. Every run writes a
//! manifest with the resolved configuration.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 internal error.

mod commands;

use clap::{Args, Parser, Subcommand};
use recause::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "recause", version, about = "cause discovery for recurring outcomes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth DAGs and synthetic datasets
    Simulate(SimulateArgs),
    /// Run the structure-learner ensemble and compute cause supports
    Discover(DiscoverArgs),
    /// Estimate per-graph total effects and modifier interactions
    Effects(EffectsArgs),
    /// Score discovery output against a ground-truth DAG
    Evaluate(EvaluateArgs),
    /// Render ranked-cause tables and charts from saved effect records
    Report(ReportArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Graph model: er | ba
    #[arg(long)]
    topology: Option<String>,
    /// Event node count (outcome added on top)
    #[arg(long)]
    nodes: Option<usize>,
    /// ER edges-per-node target or BA attachment count
    #[arg(long)]
    sparsity: Option<f64>,
    /// Data generator: l | ll | bl
    #[arg(long)]
    mode: Option<String>,
    /// Rows per dataset (default nodes x 1000)
    #[arg(long)]
    samples: Option<usize>,
    /// Number of DAG+dataset pairs to generate
    #[arg(long)]
    seeds: Option<usize>,
    /// Master RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; keys mirror the flags, explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct DiscoverArgs {
    /// Binary dataset CSV with the outcome column
    #[arg(long)]
    data: Option<PathBuf>,
    /// Event-log CSV (unit_id, time, event) instead of --data
    #[arg(long)]
    events: Option<PathBuf>,
    /// Outcome column / event name
    #[arg(long)]
    outcome: Option<String>,
    /// Comma-separated learners (pc, hc, mmhc, ges, noisy_baseline)
    #[arg(long)]
    learners: Option<String>,
    /// Significance level for independence tests
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest conditioning set the constraint learners search
    #[arg(long = "max-cond")]
    max_cond: Option<usize>,
    /// Bootstrap resamples per score-based learner
    #[arg(long = "bootstrap-runs")]
    bootstrap_runs: Option<usize>,
    /// Equivalent sample size for the BDeu score
    #[arg(long)]
    ess: Option<f64>,
    /// Repeat window for event labeling (event input only)
    #[arg(long)]
    tau: Option<u32>,
    /// Fraction of most frequent event columns to keep (event input only)
    #[arg(long = "keep-fraction")]
    keep_fraction: Option<f64>,
    /// Master RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; keys mirror the flags, explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct EffectsArgs {
    /// Binary dataset CSV the discovery ran on
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory of a discover run
    #[arg(long)]
    discovery: Option<PathBuf>,
    /// Significance level for interaction tests
    #[arg(long)]
    alpha: Option<f64>,
    /// Ranking mode: risk | preventive
    #[arg(long)]
    mode: Option<String>,
    /// Number of causes to keep in the ranked report
    #[arg(long)]
    top: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; keys mirror the flags, explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Output directory of a discover run
    #[arg(long)]
    discovery: Option<PathBuf>,
    /// Ground-truth DAG in graph text format
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Optional effects.json for significance-weighted supports
    #[arg(long)]
    effects: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; keys mirror the flags, explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// effects.json from an effects run
    #[arg(long)]
    effects: Option<PathBuf>,
    /// Ranking mode: risk | preventive
    #[arg(long)]
    mode: Option<String>,
    /// Number of causes to keep in the ranked report
    #[arg(long)]
    top: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; keys mirror the flags, explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Positivity { .. } | Error::Io(_) => 3,
        Error::Internal(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Discover(args) => commands::discover(args),
        Command::Effects(args) => commands::effects(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
