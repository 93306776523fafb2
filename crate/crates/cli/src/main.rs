#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;
mod verify;

use commands::*;
use error::{exit, CliResult};

/// Geodesics, curvature and volume comparison on Finsler models.
///
/// FINSLER_THREADS sets the worker count (default: all cores).
#[derive(Parser, Debug)]
#[command(name = "finsler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the model's known constants as JSON.
    Info(ModelArgs),
    /// Integrate a geodesic and write it as CSV.
    Geodesic(GeodesicArgs),
    /// Flag, S and Ricci curvature on random flags.
    CurvatureScan(ScanArgs),
    /// Vol/Area of geodesic balls against the comparison bounds.
    BallRatio(BallRatioArgs),
    /// Volume entropy by a log-linear fit.
    Entropy(EntropyArgs),
    /// Run every self-check that applies to the model.
    Verify(VerifyArgs),
    /// Cross-check a ball volume by Monte Carlo.
    OracleMc(OracleArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("FINSLER_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        error::CliError::option("FINSLER_THREADS", format!("expected a positive integer, got '{raw}'"))
    })?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: &Cli) -> CliResult<u8> {
    configure_threads()?;
    match &cli.command {
        Command::Info(a) => info(a),
        Command::Geodesic(a) => geodesic(a),
        Command::CurvatureScan(a) => curvature_scan(a),
        Command::BallRatio(a) => ball_ratio(a),
        Command::Entropy(a) => entropy(a),
        Command::Verify(a) => verify(a),
        Command::OracleMc(a) => oracle_mc(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
