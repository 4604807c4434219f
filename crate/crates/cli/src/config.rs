//! Experiment configuration: a TOML file merged with command-line flags.
//!
//! Flags win over config values, config values win over defaults. The
//! resolved context is echoed verbatim into every report so a run can be
//! reproduced from its output alone.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Expected subcommand; a mismatch with the invoked one is refused.
    pub command: Option<String>,
    /// Output directory for the report set.
    pub output: Option<String>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub params: Params,
}

/// Input files. Chain specs are either file paths or builtins
/// (`builtin:k3`, `builtin:disjointness:1/4`); layer specs additionally
/// allow `builtin:star` and `builtin:perturbed-star`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub chain: Option<String>,
    pub function: Option<String>,
    pub function2: Option<String>,
    pub layer: Option<String>,
}

/// The flat parameter block. Commands read the fields they need and apply
/// documented defaults for the rest; ranges are validated at use.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub p_exponent: Option<f64>,
    pub offstar_mass: Option<f64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub r: Option<usize>,
    pub j_budget: Option<usize>,
    pub element: Option<usize>,
    pub steps: Option<usize>,
    pub pairs: Option<usize>,
    pub points: Option<usize>,
    pub cases: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub suite: Option<String>,
    pub target: Option<String>,
    pub cap_points: Option<usize>,
    pub cap_mwis: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Practical,
    Faithful,
}

impl Mode {
    pub fn parse(text: &str) -> Result<Mode, CliError> {
        match text {
            "practical" => Ok(Mode::Practical),
            "faithful" => Ok(Mode::Faithful),
            other => Err(CliError::Config(format!(
                "mode must be practical or faithful, got `{other}`"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Practical => "practical",
            Mode::Faithful => "faithful",
        }
    }
}

/// Command-line overrides, all optional.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub cap_points: Option<usize>,
    pub cap_mwis: Option<usize>,
}

/// Everything a command needs to run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub command: String,
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub mode: Mode,
    pub cap_points: usize,
    pub cap_mwis: usize,
}

pub fn resolve(command: &str, overrides: Overrides) -> Result<RunContext, CliError> {
    let config = match &overrides.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(expected) = &config.command {
        if expected != command {
            return Err(CliError::Config(format!(
                "config is for `{expected}` but `{command}` was invoked"
            )));
        }
    }
    let mode_text = overrides
        .mode
        .clone()
        .or_else(|| config.params.mode.clone())
        .unwrap_or_else(|| "practical".into());
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(RunContext {
        command: command.to_string(),
        seed: overrides.seed.or(config.params.seed).unwrap_or(0),
        mode: Mode::parse(&mode_text)?,
        cap_points: overrides
            .cap_points
            .or(config.params.cap_points)
            .unwrap_or(removal_core::chain::DEFAULT_POINT_CAP),
        cap_mwis: overrides
            .cap_mwis
            .or(config.params.cap_mwis)
            .unwrap_or(removal_core::independent::DEFAULT_MWIS_CAP),
        out_dir,
        config,
    })
}
