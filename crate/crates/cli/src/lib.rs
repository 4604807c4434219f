//! Batch experiment runner for the removal machinery.
//!
//! Every run follows the same shape: resolve a [`config::RunContext`] from
//! a TOML config plus command-line overrides, execute one subcommand, and
//! write a deterministic [`report::Report`] (text body plus a JSON sidecar
//! with identical content). Wall-clock timing goes to a separate file so
//! the report body is byte-reproducible under a fixed seed.
//!
//! Derived quantities never reach a report unchecked: each command
//! recomputes them through the brute-force oracle path and aborts on
//! disagreement beyond 1e-9.

pub mod commands;
pub mod config;
pub mod inputs;
pub mod report;
pub mod suites;

use std::time::Instant;

use thiserror::Error;

use removal_core::chain::ChainError;
use removal_core::functions::FunctionError;
use removal_core::independent::IndependentError;
use removal_core::junta::JuntaError;
use removal_core::kneser::KneserError;
use removal_core::refine::RefineError;

pub use config::{ExperimentConfig, Mode, Overrides, RunContext};
pub use report::Report;

/// Tolerance for the report-time oracle recomputation of derived scalars.
pub const ORACLE_GATE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config file, bad parameter range, missing input. Exit code 3.
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// A reported quantity disagrees with its oracle recomputation. Exit
    /// code 2.
    #[error("{what}: reported {got} but the oracle path computed {oracle}")]
    OracleMismatch { what: String, got: f64, oracle: f64 },
    /// A theorem-level check failed. Exit code 2.
    #[error("invariant: {0}")]
    Invariant(String),
    /// A documented negative outcome (capture budget, heavy sides). Exit
    /// code 1.
    #[error("soft failure: {0}")]
    Soft(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 3,
            CliError::OracleMismatch { .. } | CliError::Invariant(_) => 2,
            CliError::Soft(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.display().to_string(), source }
    }
}

/// How a completed run ends: reports are written in all three cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Soft(String),
    Invariant(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::Soft(_) => 1,
            Outcome::Invariant(_) => 2,
        }
    }
}

/// Maps core errors onto exit classes: resource budgets and undecidable
/// inputs are soft, parameter or shape problems are config errors, and
/// violated theorem guarantees are invariant failures.
pub fn classify_junta(err: JuntaError) -> CliError {
    match err {
        JuntaError::Budget { .. }
        | JuntaError::NoSideQualifies { .. }
        | JuntaError::BruteBudget { .. }
        | JuntaError::NoCleanPair => CliError::Soft(err.to_string()),
        JuntaError::Independent(inner) => classify_independent(inner),
        JuntaError::Function(inner) => classify_function(inner),
        JuntaError::Chain(inner) => classify_chain(inner),
        _ => CliError::Config(err.to_string()),
    }
}

pub fn classify_independent(err: IndependentError) -> CliError {
    match err {
        IndependentError::VertexCap { .. } => CliError::Soft(err.to_string()),
        IndependentError::Function(inner) => classify_function(inner),
        _ => CliError::Config(err.to_string()),
    }
}

pub fn classify_function(err: FunctionError) -> CliError {
    match err {
        FunctionError::Chain(inner) => classify_chain(inner),
        _ => CliError::Config(err.to_string()),
    }
}

pub fn classify_chain(err: ChainError) -> CliError {
    CliError::Config(err.to_string())
}

pub fn classify_refine(err: RefineError) -> CliError {
    match err {
        RefineError::EntropyGainViolation { .. } | RefineError::Stagnation { .. } => {
            CliError::Invariant(err.to_string())
        }
        RefineError::Junta(inner) => classify_junta(inner),
        RefineError::Function(inner) => classify_function(inner),
        _ => CliError::Config(err.to_string()),
    }
}

pub fn classify_kneser(err: KneserError) -> CliError {
    match err {
        KneserError::Junta(inner) => classify_junta(inner),
        KneserError::Independent(inner) => classify_independent(inner),
        KneserError::Function(inner) => classify_function(inner),
        KneserError::Chain(inner) => classify_chain(inner),
        _ => CliError::Config(err.to_string()),
    }
}

/// Full run: resolve, execute, write the report set, print the body, and
/// return the process exit code.
pub fn execute(command: &str, overrides: Overrides) -> i32 {
    let ctx = match config::resolve(command, overrides) {
        Ok(ctx) => ctx,
        Err(err) => {
            eprintln!("error: {err}");
            return err.exit_code();
        }
    };
    let started = Instant::now();
    match commands::run(&ctx) {
        Ok((report, outcome)) => {
            let wall_ms = started.elapsed().as_millis();
            if let Err(err) = report::write(&ctx.out_dir, &ctx.command, &report, wall_ms) {
                eprintln!("error: {err}");
                return err.exit_code();
            }
            print!("{}", report.render_text());
            println!("wall_ms = {wall_ms}");
            if let Outcome::Soft(detail) | Outcome::Invariant(detail) = &outcome {
                eprintln!("{}: {detail}", if outcome.exit_code() == 1 { "soft failure" } else { "invariant failure" });
            }
            outcome.exit_code()
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
