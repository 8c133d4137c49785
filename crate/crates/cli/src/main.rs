//! Command-line front end: `test`, `simulate`, `equivalence` and `report`.

mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{equivalence, report, simulate, test};

#[derive(Debug, Parser)]
#[command(name = "citlab", version, about = "Conditional independence tests with resampled nuisance regressions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test every predictor of a CSV dataset and select with Bonferroni.
    Test(test::TestArgs),
    /// Run a simulation grid, or the timing sweep with --timing.
    Simulate(simulate::SimulateArgs),
    /// Run the linear-model HRT/tPCM comparison.
    Equivalence(equivalence::EquivalenceArgs),
    /// Summarize and plot saved simulation results.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Test(a) => test::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Equivalence(a) => equivalence::run(a),
        Command::Report(a) => report::run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
