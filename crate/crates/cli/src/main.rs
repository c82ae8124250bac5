//! `riccati`: batch front-end of the dichotomy Riccati solver.

mod commands;
mod config;
mod error;
mod matrix_io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Format;
use crate::config::{Overrides, RunConfig, ScanKind};
use crate::error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "riccati",
    version,
    about = "Riccati equations through dichotomy projections of the Hamiltonian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for reports and CSV files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Residual and agreement tolerance.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    /// Absolute quadrature tolerance.
    #[arg(long = "quad-tol", global = true, value_name = "X")]
    quad_tol: Option<f64>,

    /// Seed of random problem kinds.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline and write the report.
    Solve,
    /// Resolvent or singular-value scan as CSV.
    Scan {
        /// Scan kind; falls back to `[scan] kind`.
        #[arg(value_enum)]
        kind: Option<ScanKind>,
    },
    /// Compare the contour and oracle paths.
    Compare,
    /// Write the system matrices and an explicit config.
    Generate,
}

fn run(cli: Cli) -> CliResult<()> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let overrides = Overrides {
        out: cli.out,
        tol: cli.tol,
        quad_tol: cli.quad_tol,
        seed: cli.seed,
    };
    let cfg = RunConfig::load(&path, &overrides)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg, cli.format),
        Command::Scan { kind } => {
            let kind = kind
                .or(cfg.scan.kind)
                .ok_or_else(|| CliError::Config("scan kind missing (argument or [scan] kind)".into()))?;
            commands::scan(&cfg, kind, cli.format)
        }
        Command::Compare => commands::compare(&cfg, cli.format),
        Command::Generate => commands::generate(&cfg, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riccati: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
