//! `ecqs` command-line tool.
//!
//! Exit status is 0 on success, 1 for invalid input and 2 when a numerical
//! consistency check fails. Errors are reported as one JSON line on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ecqs", version, about = "Error-corrected sensing under correlated dephasing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Jump modes of a noise model and whether error-corrected sensing is possible.
    Jumps(JumpsArgs),
    /// Error-correction conditions and effective logical model of a code.
    Check(CheckArgs),
    /// Search for a code by basin hopping.
    Search(SearchArgs),
    /// Classify singular three-qubit correlation matrices on a grid.
    Scan(ScanArgs),
    /// Simulate free evolution interleaved with recovery.
    Simulate(SimulateArgs),
    /// Compare parallel, GHZ and actively corrected sensing.
    Sensitivity(SensitivityArgs),
    /// Estimate pair correlations from GHZ-pair decay.
    EstimateC(EstimateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OutArgs {
    /// Write the result here instead of stdout, with a manifest beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct JumpsArgs {
    /// Noise model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Code JSON.
    #[arg(long)]
    pub code: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gain_min: f64,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the found code alone, for use with `check` and `simulate`.
    #[arg(long)]
    pub code_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    /// Points per axis over [-1, 1].
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gain_min: f64,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub code: PathBuf,
    /// Recovery channel JSON; built from the model and code when omitted.
    #[arg(long)]
    pub recovery: Option<PathBuf>,
    /// Recovery period.
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub steps: usize,
    /// Relative phase of the initial logical superposition.
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    /// KL residual accepted when building the recovery.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SensitivityArgs {
    #[arg(long, default_value_t = 0.0)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 20)]
    pub gamma_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t2: f64,
    /// Interrogation time cap; defaults to 100·T2.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Zero-based qubit pairs, e.g. `0-1,1-2`.
    #[arg(long)]
    pub pairs: String,
    /// Comma-separated sample times.
    #[arg(long)]
    pub t_samples: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return report(&commands::CliError::usage(first));
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &commands::CliError) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": e.kind, "message": e.message }));
    ExitCode::from(e.exit_code())
}
