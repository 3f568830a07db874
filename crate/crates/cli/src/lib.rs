//! Configuration-driven experiment runner behind the `fdt` binary.
//!
//! Each experiment turns an [`ExperimentConfig`] into a [`ResultTable`]
//! whose metadata records the parameters, the seed and every tolerance
//! comparison made along the way.

// `!(x > 0.0)` is the idiom for rejecting NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use fdt_core::FdtError;
use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod oscillators;
pub mod table;

pub use config::ExperimentConfig;
pub use table::{Format, ResultTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(FdtError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<FdtError> for CliError {
    fn from(e: FdtError) -> Self {
        match e {
            FdtError::InvalidParameter { .. }
            | FdtError::UnequalTemperatures { .. }
            | FdtError::UnsupportedObservable(_)
            | FdtError::GridMismatch(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) | CliError::Internal(_) => 3,
        }
    }
}

/// Exit status of a run whose table was produced.
pub fn table_exit_code(table: &ResultTable) -> i32 {
    if table.passed() {
        0
    } else {
        1
    }
}

/// Subcommands of `fdt oscillators`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum OscillatorRun {
    /// Closed-form steady state against the Lyapunov solve over couplings.
    SteadyState,
    /// Response function and driven susceptibilities χ_B(t).
    Response,
    /// |χ_B(ν)| over the modulation frequency.
    Susceptibility,
    /// Sensitivity F(B)_t against the QFI bound.
    Sensitivity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Static,
    MapFdt,
    Kubo,
    Oscillators(OscillatorRun),
}

impl Experiment {
    /// Name accepted in the config's `experiment` key.
    pub fn config_name(self) -> &'static str {
        match self {
            Experiment::Static => "static",
            Experiment::MapFdt => "map-fdt",
            Experiment::Kubo => "kubo",
            Experiment::Oscillators(_) => "oscillators",
        }
    }

    /// Stem of the output file.
    pub fn output_name(self) -> &'static str {
        match self {
            Experiment::Oscillators(OscillatorRun::SteadyState) => "oscillators-steady-state",
            Experiment::Oscillators(OscillatorRun::Response) => "oscillators-response",
            Experiment::Oscillators(OscillatorRun::Susceptibility) => "oscillators-susceptibility",
            Experiment::Oscillators(OscillatorRun::Sensitivity) => "oscillators-sensitivity",
            other => other.config_name(),
        }
    }
}

pub fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<ResultTable, CliError> {
    config.check_experiment(experiment.config_name())?;
    let mut table = match experiment {
        Experiment::Static => experiments::run_static_fdt(config)?,
        Experiment::MapFdt => experiments::run_map_fdt(config)?,
        Experiment::Kubo => experiments::run_kubo(config)?,
        Experiment::Oscillators(sub) => oscillators::run_oscillators(config, sub)?,
    };
    table.meta("experiment", experiment.output_name());
    table.meta("version", env!("CARGO_PKG_VERSION"));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(FdtError::UnsupportedObservable("q".into())).exit_code(), 2);
        assert_eq!(CliError::from(FdtError::UnequalTemperatures { t1: 1.0, t2: 2.0 }).exit_code(), 2);
        assert_eq!(CliError::from(FdtError::TruncationLeakage { mode: 2, leakage: 0.1 }).exit_code(), 3);
        assert_eq!(CliError::from(FdtError::PositivityBreach { time: 1.0, min_eigenvalue: -1.0 }).exit_code(), 3);
    }

    #[test]
    fn experiment_guard_applies() {
        let c = ExperimentConfig { experiment: Some("kubo".into()), ..Default::default() };
        assert!(matches!(run(Experiment::Static, &c), Err(CliError::Config(_))));
    }
}
