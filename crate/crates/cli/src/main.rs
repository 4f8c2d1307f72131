//! `cqr`: fit, tune, simulate, export and verify convex quantile and
//! expectile regressions from the command line.

mod args;
mod commands;
mod document;
mod input;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use clap::error::ErrorKind;

use args::{Cli, Command};

/// Failures, each mapped to its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or unreadable input (exit 2).
    Csv(String),
    /// Invalid flag values or combinations (exit 3).
    Flags(String),
    /// The solver could not produce a valid fit, or a verified document
    /// failed its checks (exit 4).
    Solver(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Csv(_) => 2,
            CliError::Flags(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Csv(m) | CliError::Flags(m) | CliError::Solver(m) => f.write_str(m),
        }
    }
}

impl From<cqr_core::Error> for CliError {
    fn from(e: cqr_core::Error) -> Self {
        use cqr_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::TooManySubsets { .. } => CliError::Flags(e.to_string()),
            E::InvalidData(_) => CliError::Csv(e.to_string()),
            E::Io(_) => CliError::Csv(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CQR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Flags(format!("CQR_THREADS = {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Flags(format!("CQR_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Export(a) => commands::export(&a),
        Command::Verify(a) => commands::verify(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(3),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
