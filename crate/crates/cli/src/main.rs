//! `sgfs`: projection, model fitting and benchmark reproduction.

mod bench;
mod project;
mod report;
mod solve;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "sgfs", version, about = "Sparse group feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a vector onto the intersection of an L1 ball and a group-norm ball.
    Project(project::ProjectArgs),
    /// Time sglp against ADMM and Dykstra on generated instances.
    BenchProj(bench::BenchProjArgs),
    /// Synthetic regression comparison of DC against the convex baseline.
    BenchSynth(bench::BenchSynthArgs),
    /// Fit DC or the constrained sparse group lasso to CSV data.
    Solve(solve::SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBaseArg {
    Natural,
    Ten,
}

impl From<LogBaseArg> for sgfs_core::data::LogBase {
    fn from(value: LogBaseArg) -> Self {
        match value {
            LogBaseArg::Natural => Self::Natural,
            LogBaseArg::Ten => Self::Ten,
        }
    }
}

/// Parses `loo` or a fold count.
pub fn parse_folds(s: &str) -> Result<sgfs_core::eval::Folds, String> {
    if s.eq_ignore_ascii_case("loo") {
        return Ok(sgfs_core::eval::Folds::LeaveOneOut);
    }
    s.parse()
        .map(sgfs_core::eval::Folds::KFold)
        .map_err(|_| format!("expected `loo` or a fold count, got `{s}`"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Project(args) => project::run(args),
        Command::BenchProj(args) => bench::run_proj(args),
        Command::BenchSynth(args) => bench::run_synth(args),
        Command::Solve(args) => solve::run(args),
    };
    match outcome {
        Ok(failed) if failed.is_empty() => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{} run(s) failed or did not converge:", failed.len());
            for line in failed {
                eprintln!("  {line}");
            }
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
