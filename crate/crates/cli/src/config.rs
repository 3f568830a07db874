//! Flat JSON experiment configuration.
//!
//! Every key is optional. Values are resolved in the order command-line
//! flag, config file, built-in default; unknown keys are rejected.

use std::path::Path;

use fdt_core::{OscillatorParams, Quadratic};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional name of the experiment the file is meant for; checked
    /// against the subcommand when present.
    pub experiment: Option<String>,
    pub seed: Option<u64>,

    // Randomized validation suites.
    pub instances: Option<usize>,
    pub dim: Option<usize>,
    pub beta: Option<f64>,
    /// `"random"` or `"constant"` (λ-independent) channel family.
    pub family: Option<String>,

    // Time and frequency grids.
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub omegas: Option<Vec<f64>>,
    pub omega_points: Option<usize>,
    pub damping: Option<f64>,
    pub nus: Option<Vec<f64>>,
    pub nu_min: Option<f64>,
    pub nu_max: Option<f64>,
    pub nu_points: Option<usize>,

    // Two-oscillator model.
    pub omega: Option<f64>,
    pub delta: Option<f64>,
    pub coupling: Option<f64>,
    pub gamma: Option<f64>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub couplings: Option<Vec<f64>>,
    pub observables: Option<Vec<String>>,
    pub n_measurements: Option<u64>,
    pub truncation: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn check_experiment(&self, name: &str) -> Result<(), CliError> {
        match &self.experiment {
            Some(e) if e != name => Err(CliError::Config(format!("config is for `{e}`, not `{name}`"))),
            _ => Ok(()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn positive(&self, name: &str, value: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = value.unwrap_or(default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
        }
    }

    pub fn nonnegative(&self, name: &str, value: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = value.unwrap_or(default);
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!("{name} must be nonnegative and finite, got {v}")))
        }
    }

    pub fn count(&self, name: &str, value: Option<usize>, default: usize, min: usize) -> Result<usize, CliError> {
        let v = value.unwrap_or(default);
        if v >= min {
            Ok(v)
        } else {
            Err(CliError::Config(format!("{name} must be at least {min}, got {v}")))
        }
    }

    /// Oscillator parameters over the defaults ω=1, δ=0.1, J=0, γ=0.01,
    /// T₁=1, T₂=2.
    pub fn oscillator_params(&self) -> Result<OscillatorParams, CliError> {
        let d = OscillatorParams::default();
        let p = OscillatorParams {
            omega: self.positive("omega", self.omega, d.omega)?,
            delta: self.delta.unwrap_or(d.delta),
            coupling: self.coupling.unwrap_or(d.coupling),
            gamma: self.positive("gamma", self.gamma, d.gamma)?,
            t1: self.positive("t1", self.t1, d.t1)?,
            t2: self.positive("t2", self.t2, d.t2)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn observables(&self, default: &[Quadratic]) -> Result<Vec<Quadratic>, CliError> {
        match &self.observables {
            None => Ok(default.to_vec()),
            Some(names) if names.is_empty() => Err(CliError::Config("observables must not be empty".into())),
            Some(names) => names.iter().map(|n| n.parse::<Quadratic>().map_err(CliError::from)).collect(),
        }
    }

    /// `points` values spread evenly over `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![lo],
            n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}
