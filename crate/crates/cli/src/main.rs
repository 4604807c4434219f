use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use removal_cli::Overrides;

/// Deterministic experiment runner for product-graph removal machinery.
#[derive(Parser)]
#[command(name = "removal", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for the report files (default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the run's single ChaCha8 generator.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// "practical" runs at desk scale, "faithful" additionally reports
    /// the proof-exact parameter trail without running at it.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Largest product space the run may materialize.
    #[arg(long, global = true)]
    cap_points: Option<usize>,

    /// Largest vertex count handed to the exact independent-set solver.
    #[arg(long, global = true)]
    cap_mwis: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a chain definition and report its spectrum.
    ValidateChain,
    /// Edge mass between two functions, checked against the pair sum.
    Quadform,
    /// Matching-like decomposition with an exact MWIS certificate.
    Decompose,
    /// Distance from the nearest independent set.
    Far,
    /// Entropy-driven coordinate refinement trace.
    Refine,
    /// Two-sided junta capture with the driven threshold schedule.
    Capture,
    /// One-function capture onto independent cells.
    IndependentCapture,
    /// Intersecting-family capture on a Kneser layer.
    Kneser,
    /// Batch verification suites.
    Sweep,
    /// Implementation versus brute-force oracles on random instances.
    OracleCompare,
    /// Parameter schedule, growth preview, and tower values.
    Schedule,
    /// Entropy-gain inequality over its admissible grid.
    PhiGrid,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ValidateChain => "validate-chain",
            Command::Quadform => "quadform",
            Command::Decompose => "decompose",
            Command::Far => "far",
            Command::Refine => "refine",
            Command::Capture => "capture",
            Command::IndependentCapture => "independent-capture",
            Command::Kneser => "kneser",
            Command::Sweep => "sweep",
            Command::OracleCompare => "oracle-compare",
            Command::Schedule => "schedule",
            Command::PhiGrid => "phi-grid",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is
            // a configuration error.
            let code = if err.use_stderr() { 3 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let overrides = Overrides {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        mode: cli.mode,
        cap_points: cli.cap_points,
        cap_mwis: cli.cap_mwis,
    };
    ExitCode::from(removal_cli::execute(cli.command.name(), overrides) as u8)
}
