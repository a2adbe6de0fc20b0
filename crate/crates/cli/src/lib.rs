//! The `awi` command-line tool.
//!
//! - `awi simulate` runs Monte-Carlo policy comparisons and writes a CSV row
//!   per (system, β, policy).
//! - `awi index` tabulates the approximated Whittle index over a belief grid.
//! - `awi validate` runs the oracle property suites and prints a JSON report.
//!
//! Exit codes: 0 success, 1 a validation property failed, 2 bad arguments or
//! configuration, 3 runtime failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::BetaSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "awi", version, about = "Approximated Whittle index policies for CQI-observed channels")]
pub struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare policies by Monte-Carlo simulation.
    Simulate(SimulateArgs),
    /// Tabulate a channel's index over a belief grid.
    Index(IndexArgs),
    /// Run oracle property suites.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Results CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Master seed for every random stream.
    #[arg(long, required = true)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub runs: Option<u32>,

    #[arg(long)]
    pub horizon: Option<u32>,

    /// Discount factors: numbers in (0, 1) or `paper-bound`.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<BetaSpec>,

    /// Policies: `myopic`, `random`, `awi` or `awi:<n>`, optionally with `+random-ties`.
    #[arg(long, value_delimiter = ',')]
    pub policy: Vec<String>,

    /// Iteration depth for a bare `awi` policy.
    #[arg(long)]
    pub iters: Option<u32>,

    /// Built-in systems to simulate when no experiment file is given.
    #[arg(long, value_delimiter = ',')]
    pub system: Vec<String>,

    /// Channels used per slot.
    #[arg(long)]
    pub active: Option<usize>,

    /// Also write mean partial-return curves to this CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,

    /// Write the run-0 trace of every simulated combination to `<out>.trace.jsonl`.
    #[arg(long)]
    pub emit_trace: bool,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Take the channel from a built-in system.
    #[arg(long)]
    pub system: Option<String>,

    /// 1-based channel position within `--system`.
    #[arg(long, requires = "system")]
    pub channel: Option<usize>,

    #[arg(long, conflicts_with = "system")]
    pub p01: Option<f64>,

    #[arg(long, conflicts_with = "system")]
    pub p11: Option<f64>,

    /// CQI levels as `P(i|poor),P(i|good);...`; a single `1,1` level is uninformative.
    #[arg(long)]
    pub obs: Option<String>,

    #[arg(long)]
    pub throughput: Option<f64>,

    /// A number in (0, 1) or `paper-bound`.
    #[arg(long, default_value = "paper-bound")]
    pub beta: BetaSpec,

    #[arg(long, default_value_t = 2)]
    pub iters: u32,

    /// Number of evenly spaced beliefs in [0, 1].
    #[arg(long, default_value_t = 101)]
    pub grid: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// `crossing`, `lemmas`, `oracle`, `indexability` or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Random instances per suite.
    #[arg(long)]
    pub budget: Option<usize>,

    /// JSON report; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
