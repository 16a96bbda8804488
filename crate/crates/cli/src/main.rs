mod cli;
mod commands;
mod config;
mod errors;
mod output;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use cli::{Cli, Command};
use commands::Report;
use errors::{exit_code, EXIT_USAGE};

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            anyhow::bail!(errors::UsageError("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("starting worker threads")?;
    }
    let report = Report { quiet: cli.quiet };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &report),
        Command::Estimate(a) => commands::estimate(a, &report),
        Command::CoverageStudy(a) => commands::coverage(a, &report),
        Command::HouseholdAnalyze(a) => commands::household(a, &report),
        Command::SarSim(a) => commands::sar(a, &report),
        Command::HouseholdFixture(a) => commands::fixture(a, &report),
    }
}

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
