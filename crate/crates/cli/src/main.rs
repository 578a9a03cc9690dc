//! `tailsep` command-line interface.
//!
//! Exit codes: 0 on success (possibly with warnings), 2 for usage and data
//! errors, 3 for numerical failures.

mod crit_table;
mod detect;
mod input;
mod output;
mod risk;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<tailsep::Error> for CliError {
    fn from(e: tailsep::Error) -> Self {
        match e {
            tailsep::Error::Pole(_) | tailsep::Error::DivergentStatistic(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tailsep", version, about = "Body/tail separation with generalized Pareto tail models")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "TAILSEP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate the tail of a sample and fit a GPD to it.
    Detect(detect::DetectArgs),
    /// Generate Monte Carlo critical values for the goodness-of-fit tests.
    CritTable(crit_table::CritTableArgs),
    /// Run the detection on ideal-case or simulated samples.
    Simulate(simulate::SimulateArgs),
    /// VaR and CVaR from a fitted tail.
    Risk(risk::RiskArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    match cli.command {
        Command::Detect(args) => detect::run(args),
        Command::CritTable(args) => crit_table::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Risk(args) => risk::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
