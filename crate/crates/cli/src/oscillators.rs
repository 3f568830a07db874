//! Two-oscillator, two-bath experiments.

use fdt_core::gaussian_lab::fock::fock_kick_response;
use fdt_core::gaussian_lab::{
    gaussian_response_fdt, gaussian_sld, gaussian_static_susceptibility, gaussian_variance, ness_qfi, response_analytic,
    steady_state_cm, steady_state_lyapunov, susceptibility_analytic,
};
use fdt_core::response::{
    generalized_susceptibility, late_time_oscillation, sensitivity, time_dependent_susceptibility, TimeGrid,
};
use fdt_core::{DriveProtocol, OscillatorParams, Quadratic, QuadraticObservable, ResponseSeries};

use crate::{CliError, ExperimentConfig, OscillatorRun, ResultTable};

/// Closed-form steady state against the Lyapunov solve, relative to max |σ|.
pub const STEADY_STATE_TOL: f64 = 1e-10;
/// Gaussian-numeric response against the closed form, relative to the peak.
pub const RESPONSE_TOL: f64 = 1e-8;
/// Truncated-Fock kick response against the Gaussian route, relative to the peak.
pub const FOCK_TOL: f64 = 1e-2;
/// `χ_B(t)` at `t = 10/γ` against `χ_B^s`, relative.
pub const PLATEAU_TOL: f64 = 1e-4;
/// Sampled transform of φ against the closed-form spectrum, relative to the peak.
pub const SPECTRUM_TOL: f64 = 1e-3;
/// Slack on `F(B)_∞ ≤ √(n𝓕₀)`.
pub const BOUND_SLACK: f64 = 1e-8;
/// `F(Λ₀)_∞ = √(n𝓕₀)`, relative.
pub const SATURATION_TOL: f64 = 1e-6;
/// Kick strength of the Fock oracle.
pub const KICK_EPS: f64 = 1e-4;

pub fn run_oscillators(config: &ExperimentConfig, sub: OscillatorRun) -> Result<ResultTable, CliError> {
    let p = config.oscillator_params()?;
    let mut table = match sub {
        OscillatorRun::SteadyState => steady_state(config, &p)?,
        OscillatorRun::Response => response(config, &p)?,
        OscillatorRun::Susceptibility => susceptibility(config, &p)?,
        OscillatorRun::Sensitivity => sensitivity_run(config, &p)?,
    };
    for (k, v) in [("omega", p.omega), ("delta", p.delta), ("gamma", p.gamma), ("t1", p.t1), ("t2", p.t2)] {
        table.meta(k, v);
    }
    table.meta("n1", p.n1());
    table.meta("n2", p.n2());
    Ok(table)
}

fn uncoupled(p: &OscillatorParams) -> Result<OscillatorParams, CliError> {
    if p.coupling != 0.0 {
        return Err(CliError::Config("this run works at J = 0; set `couplings` for the steady-state sweep".into()));
    }
    Ok(*p)
}

fn time_grid(config: &ExperimentConfig, p: &OscillatorParams, default_t_max: f64) -> Result<TimeGrid, CliError> {
    let t_max = config.positive("t_max", config.t_max, default_t_max)?;
    let dt = config.positive("dt", config.dt, 0.1)?;
    if t_max * p.gamma > 1e4 {
        return Err(CliError::Config(format!("t_max = {t_max} is far beyond the relaxation time 1/γ")));
    }
    Ok(TimeGrid::covering(t_max.max(dt), dt)?)
}

fn series(grid: TimeGrid, f: impl Fn(f64) -> Result<f64, fdt_core::FdtError>) -> Result<ResponseSeries, CliError> {
    let values = (0..grid.len()).map(|k| f(grid.time(k))).collect::<Result<Vec<_>, _>>()?;
    Ok(ResponseSeries::new(0.0, grid.dt, values)?)
}

/// `max |x − y| / max |y|`, or the plain difference when y vanishes.
pub fn peak_relative(x: &ResponseSeries, y: &ResponseSeries) -> Result<f64, CliError> {
    let diff = x.max_difference(y)?;
    let peak = y.max_abs();
    Ok(if peak > 0.0 { diff / peak } else { diff })
}

fn steady_state(config: &ExperimentConfig, p: &OscillatorParams) -> Result<ResultTable, CliError> {
    let couplings = config.couplings.clone().unwrap_or_else(|| ExperimentConfig::linspace(0.0, 0.1, 11));
    if couplings.is_empty() {
        return Err(CliError::Config("couplings must not be empty".into()));
    }
    let mut table = ResultTable::new(["coupling", "sigma11", "sigma22", "sigma12", "sigma14", "lyapunov_rel_err"]);
    let mut worst: f64 = 0.0;
    for &j in &couplings {
        let q = p.with_coupling(j);
        q.validate()?;
        let closed = steady_state_cm(&q)?;
        let numeric = steady_state_lyapunov(&q)?;
        let s = closed.cov();
        let err = (s - numeric.cov()).abs().max() / s.abs().max();
        worst = worst.max(err);
        table.push_row(vec![j, s[(0, 0)], s[(1, 1)], s[(0, 1)], s[(0, 3)], err])?;
    }
    table.check("steady_state_rel_err", worst, STEADY_STATE_TOL);
    let p0 = p.with_coupling(0.0);
    let sld = gaussian_sld(&p0)?;
    for (k, c) in sld.c.iter().enumerate() {
        table.meta(format!("c{}", k + 1), c);
    }
    table.meta("qfi", ness_qfi(&p0)?);
    Ok(table)
}

fn nu_label(nu: f64) -> String {
    format!("chi_nu_{nu}")
}

/// Driven susceptibility for `λ(t) = J₀(1 − cos νt)`; at ν = 0 that kernel
/// vanishes, so ν = 0 means the constant drive `λ(t) = J₀`.
pub fn drive_for(nu: f64) -> DriveProtocol {
    if nu == 0.0 {
        DriveProtocol::Constant { j0: 1.0 }
    } else {
        DriveProtocol::Sinusoidal { j0: 1.0, nu }
    }
}

fn response(config: &ExperimentConfig, p: &OscillatorParams) -> Result<ResultTable, CliError> {
    let p = uncoupled(p)?;
    let obs = config.observables(&[Quadratic::X1X2])?[0];
    let grid = time_grid(config, &p, 10.0 / p.gamma)?;
    let nus = config.nus.clone().unwrap_or_else(|| vec![0.0, p.delta / 2.0, p.delta]);
    if nus.iter().any(|nu| !(nu.is_finite() && *nu >= 0.0)) {
        return Err(CliError::Config("nus must be finite and nonnegative".into()));
    }
    let phi = gaussian_response_fdt(&p, &obs.observable(), grid)?;
    let exact = series(grid, |t| response_analytic(obs, t, &p))?;
    let chis = nus.iter().map(|&nu| time_dependent_susceptibility(&phi, &drive_for(nu))).collect::<Result<Vec<_>, _>>()?;
    let fock = match config.truncation {
        Some(n_max) => {
            let (s, leakage) = fock_kick_response(&p, &obs.observable(), n_max, grid, KICK_EPS)?;
            Some((s, leakage, n_max))
        }
        None => None,
    };

    let mut columns = vec!["t".to_string(), "phi".into(), "phi_analytic".into()];
    columns.extend(nus.iter().map(|&nu| nu_label(nu)));
    if fock.is_some() {
        columns.push("phi_fock".into());
    }
    let mut table = ResultTable::new(columns);
    table.meta("observable", obs);
    table.meta("t_max", grid.t_max());
    table.meta("dt", grid.dt);
    for k in 0..grid.len() {
        let mut row = vec![grid.time(k), phi.values()[k], exact.values()[k]];
        row.extend(chis.iter().map(|c| c.values()[k]));
        if let Some((s, _, _)) = &fock {
            row.push(s.values()[k]);
        }
        table.push_row(row)?;
    }
    table.check("response_vs_closed_form", peak_relative(&phi, &exact)?, RESPONSE_TOL);

    let chi_s = gaussian_static_susceptibility(&p, &obs.observable())?;
    table.meta("chi_static", chi_s);
    for (nu, chi) in nus.iter().zip(&chis) {
        let label = nu_label(*nu);
        if *nu == 0.0 {
            let last = chi.last().unwrap_or(0.0);
            table.meta(format!("{label}.final"), last);
            if grid.t_max() * p.gamma >= 10.0 - 1e-9 && chi_s != 0.0 {
                table.check("plateau_rel_err", (last - chi_s).abs() / chi_s.abs(), PLATEAU_TOL);
            }
        } else {
            let fit = late_time_oscillation(chi, *nu)?;
            let z = susceptibility_analytic(obs, *nu, &p)?;
            table.meta(format!("{label}.late_amplitude"), fit.fitted_amplitude);
            table.meta(format!("{label}.late_phase"), fit.phase);
            table.meta(format!("{label}.late_offset"), fit.offset);
            table.meta(format!("{label}.abs_chi_nu"), z.norm());
            table.meta(format!("{label}.arg_chi_nu"), z.arg());
        }
    }
    if let Some((s, leakage, n_max)) = fock {
        table.meta("truncation", n_max);
        table.meta("leakage_mode1", leakage[0]);
        table.meta("leakage_mode2", leakage[1]);
        table.meta("kick_eps", KICK_EPS);
        table.check("fock_kick_vs_gaussian", peak_relative(&s, &phi)?, FOCK_TOL);
    }
    Ok(table)
}

/// Shape diagnostics of a resonance curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceShape {
    pub argmax_nu: f64,
    pub grid_step: f64,
    /// `(max − min)/max` of |χ| over `ν ≤ δ/10`.
    pub low_band_variation: f64,
    /// Whether block means of ten points strictly decrease beyond δ.
    pub decreasing_above: bool,
}

pub fn resonance_shape(nus: &[f64], mags: &[f64], delta: f64) -> ResonanceShape {
    let i = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap_or(0);
    let grid_step = if nus.len() > 1 { (nus[nus.len() - 1] - nus[0]) / (nus.len() - 1) as f64 } else { 0.0 };
    let low: Vec<f64> = nus.iter().zip(mags).filter(|(nu, _)| **nu <= delta / 10.0).map(|(_, m)| *m).collect();
    let low_band_variation = match low.iter().cloned().fold(f64::NEG_INFINITY, f64::max) {
        hi if hi > 0.0 => (hi - low.iter().cloned().fold(f64::INFINITY, f64::min)) / hi,
        _ => 0.0,
    };
    let above: Vec<f64> = nus.iter().zip(mags).filter(|(nu, _)| **nu > delta).map(|(_, m)| *m).collect();
    let means: Vec<f64> = above.chunks_exact(10).map(|c| c.iter().sum::<f64>() / 10.0).collect();
    let decreasing_above = means.len() >= 2 && means.windows(2).all(|w| w[1] < w[0]);
    ResonanceShape { argmax_nu: nus.get(i).copied().unwrap_or(f64::NAN), grid_step, low_band_variation, decreasing_above }
}

fn susceptibility(config: &ExperimentConfig, p: &OscillatorParams) -> Result<ResultTable, CliError> {
    let p = uncoupled(p)?;
    let obs = config.observables(&[Quadratic::X1X2])?[0];
    let grid = time_grid(config, &p, 25.0 / p.gamma)?;
    let nus = match &config.nus {
        Some(v) => v.clone(),
        None => {
            let lo = config.nonnegative("nu_min", config.nu_min, 0.0)?;
            let hi = config.positive("nu_max", config.nu_max, 3.0 * p.delta.abs().max(1e-12))?;
            if hi <= lo {
                return Err(CliError::Config(format!("nu_max {hi} must exceed nu_min {lo}")));
            }
            ExperimentConfig::linspace(lo, hi, config.count("nu_points", config.nu_points, 200, 2)?)
        }
    };
    let phi = gaussian_response_fdt(&p, &obs.observable(), grid)?;
    let spectrum = generalized_susceptibility(&phi, &nus, 0.0)?;
    let mut table = ResultTable::new(["nu", "abs_chi", "abs_chi_analytic", "re_chi", "im_chi"]);
    table.meta("observable", obs);
    table.meta("t_max", grid.t_max());
    table.meta("dt", grid.dt);
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (nu, z) in nus.iter().zip(&spectrum.values) {
        let exact = susceptibility_analytic(obs, *nu, &p)?;
        worst = worst.max((z - exact).norm());
        peak = peak.max(exact.norm());
        table.push_row(vec![*nu, z.norm(), exact.norm(), z.re, z.im])?;
    }
    table.check("spectrum_vs_closed_form", if peak > 0.0 { worst / peak } else { worst }, SPECTRUM_TOL);
    let shape = resonance_shape(&nus, &spectrum.magnitudes(), p.delta);
    table.meta("argmax_nu", shape.argmax_nu);
    table.meta("low_band_variation", shape.low_band_variation);
    table.meta("decreasing_above_delta", shape.decreasing_above);
    let (lo, hi) = (nus.iter().cloned().fold(f64::INFINITY, f64::min), nus.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if !obs.is_local() && p.delta > lo && p.delta < hi {
        table.check("resonance_offset_in_steps", (shape.argmax_nu - p.delta).abs() / shape.grid_step, 1.0);
    }
    Ok(table)
}

fn sensitivity_run(config: &ExperimentConfig, p: &OscillatorParams) -> Result<ResultTable, CliError> {
    let p = uncoupled(p)?;
    let n = config.n_measurements.unwrap_or(1);
    if n == 0 {
        return Err(CliError::Config("n_measurements must be positive".into()));
    }
    let grid = time_grid(config, &p, 10.0 / p.gamma)?;
    let quads = config.observables(&[Quadratic::X1X2, Quadratic::X1P2])?;
    let sld = gaussian_sld(&p)?;
    let mut probes: Vec<(String, QuadraticObservable)> = quads.iter().map(|q| (q.name().to_string(), q.observable())).collect();
    probes.push(("Lambda0".into(), sld.observable().clone()));

    let f0 = ness_qfi(&p)?;
    let bound = (n as f64 * f0).sqrt();
    let mut columns = vec!["t".to_string()];
    let mut curves = Vec::new();
    let mut table_meta = Vec::new();
    for (name, obs) in &probes {
        let var = gaussian_variance(&p, obs)?;
        let phi = gaussian_response_fdt(&p, obs, grid)?;
        let chi_t = time_dependent_susceptibility(&phi, &DriveProtocol::Constant { j0: 1.0 })?;
        curves.push(sensitivity(&chi_t, var, n)?);
        let f_inf = gaussian_static_susceptibility(&p, obs)?.abs() * (n as f64 / var).sqrt();
        table_meta.push((name.clone(), f_inf));
        columns.push(format!("F_{name}"));
    }
    let mut table = ResultTable::new(columns);
    for k in 0..grid.len() {
        let mut row = vec![grid.time(k)];
        row.extend(curves.iter().map(|c| c.values()[k]));
        table.push_row(row)?;
    }
    table.meta("n_measurements", n);
    table.meta("qfi", f0);
    table.meta("bound", bound);
    for (name, f_inf) in &table_meta {
        table.meta(format!("F_{name}.infinity"), f_inf);
        if name == "Lambda0" {
            table.check("lambda0_saturates_bound", (f_inf - bound).abs() / bound, SATURATION_TOL);
        } else {
            table.check(format!("{name}_within_bound"), f_inf / bound - 1.0, BOUND_SLACK);
        }
    }
    Ok(table)
}
