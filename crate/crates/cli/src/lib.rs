//! Command-line front end: configuration, commands and output formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod record;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::Result;
use crate::record::{emit, Outcome, Record};

#[derive(Debug, Parser)]
#[command(
    name = "xoutrade",
    version,
    about = "Optimal entry and exit levels for mean-reverting prices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config with flat keys, or a JSON record from an earlier run
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Where to write the JSON record (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub keys: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the single-round-trip and repeated-trading problems
    #[command(allow_negative_numbers = true)]
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Solve over a grid of one parameter
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Table with one row per grid value
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Trade both strategies along a simulated path
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Path table (t, x, price)
        #[arg(long)]
        path_csv: Option<PathBuf>,
        /// Trade table (strategy, time, kind, log_price, price)
        #[arg(long)]
        trades_csv: Option<PathBuf>,
    },
    /// Check solved levels against independent characterizations
    #[command(allow_negative_numbers = true)]
    Verify {
        #[command(flatten)]
        common: Common,
        /// Per-point residual table
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit mu, theta and sigma to a price series
    #[command(allow_negative_numbers = true)]
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Simulate { .. } => "simulate",
            Command::Verify { .. } => "verify",
            Command::Calibrate { .. } => "calibrate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Solve { common }
            | Command::Sweep { common, .. }
            | Command::Simulate { common, .. }
            | Command::Verify { common, .. }
            | Command::Calibrate { common } => common,
        }
    }
}

/// Resolves the configuration with the defaults `command` uses, so the echo
/// in the record is complete.
fn resolve(command: &Command) -> Result<RunConfig> {
    let common = command.common();
    let mut cfg = RunConfig::resolve(common.config.as_deref(), &common.keys)?;
    match command {
        Command::Calibrate { .. } => {}
        Command::Simulate { .. } => {
            cfg.fill_quadrature_defaults();
            cfg.fill_simulation_defaults();
        }
        Command::Verify { .. } => {
            cfg.fill_quadrature_defaults();
            cfg.fill_verify_defaults();
        }
        Command::Solve { .. } | Command::Sweep { .. } => cfg.fill_quadrature_defaults(),
    }
    Ok(cfg)
}

fn execute(command: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Solve { .. } => commands::solve(cfg),
        Command::Sweep { csv, .. } => commands::sweep(cfg, csv.as_deref()),
        Command::Simulate {
            path_csv,
            trades_csv,
            ..
        } => commands::simulate(cfg, path_csv.as_deref(), trades_csv.as_deref()),
        Command::Verify { csv, .. } => commands::verify(cfg, csv.as_deref()),
        Command::Calibrate { .. } => commands::calibrate(cfg),
    }
}

/// Runs the command, writes its record, and returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let outcome = execute(&cli.command, &cfg);
    let record = Record::new(cli.command.name(), &cfg, &outcome);
    let written = record
        .to_json()
        .and_then(|text| emit(cli.command.common().output.as_deref(), &text));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let err = match &outcome {
        Ok(o) => o.failure.as_ref(),
        Err(e) => Some(e),
    };
    match err {
        Some(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        None => 0,
    }
}
