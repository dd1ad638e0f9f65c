#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod fixtures;

/// Verification suites and the compact-quotient pipeline for metrics with
/// parallel Weyl tensor.
#[derive(Parser, Debug)]
#[command(name = "ecs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curvature suite on d = 1 data (`sine`, `random`, `random:N` or a JSON file).
    VerifyD1(RunConfig),
    /// Curvature suite on d = 2 data (`flat`, `nonflat`, `nonflat:N` or a JSON file).
    VerifyD2(RunConfig),
    /// Olszak distribution, its nullity and parallelism, and the rank-one witness.
    Olszak(RunConfig),
    /// Solves the periodic Riccati system for the roots of P(k, l).
    Riccati(RunConfig),
    /// Runs the full pipeline and writes a compactness certificate.
    Certify(RunConfig),
    /// CSV of α, β, γ, f and the Riccati residuals over one period.
    Plotdata(RunConfig),
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    #[arg(long, default_value_t = 5, allow_negative_numbers = true)]
    pub k: i64,
    #[arg(long, default_value_t = 6, allow_negative_numbers = true)]
    pub l: i64,
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub period: f64,
    /// Points per axis (rows for plotdata).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_first: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_second: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fixture: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyD1(c) => commands::verify_d1(c),
        Command::VerifyD2(c) => commands::verify_d2(c),
        Command::Olszak(c) => commands::olszak(c),
        Command::Riccati(c) => commands::riccati(c),
        Command::Certify(c) => commands::certify(c),
        Command::Plotdata(c) => commands::plotdata(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
