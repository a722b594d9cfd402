//! `rpavg`: experiment runner and diagnostics front-end for the averaged
//! stochastic gradient descent library.
//!
//! Exit codes: 0 success (including inconclusive checks), 1 usage or config
//! errors, 2 violated acceptance thresholds or assumption checks.

mod check;
mod config;
mod error;
mod lemmas;
mod out;
mod problem;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

/// Averaged stochastic gradient descent: benchmark experiments, assumption
/// checkers, and deterministic sequence-bound verification.
#[derive(Parser)]
#[command(name = "rpavg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo experiment; writes mse.csv, ratefit.json,
    /// sigma_star.json, run-manifest.json, and plot.gp.
    Run(RunArgs),
    /// Run the assumption checkers selected by the config; writes one JSON
    /// report per checker.
    Check(CheckArgs),
    /// Verify the deterministic sequence bounds at default parameters.
    Lemmas,
}

#[derive(Args)]
pub struct RunArgs {
    /// Path to a key=value config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Bound on concurrently running replications.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Replace existing artifacts instead of refusing.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Args)]
pub struct CheckArgs {
    /// Path to a key=value config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Replace existing reports instead of refusing.
    #[arg(long)]
    pub overwrite: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1; --help/--version are not errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Check(args) => check::cmd_check(args),
        Command::Lemmas => lemmas::cmd_lemmas(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rpavg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
