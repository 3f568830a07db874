//! Randomized validation suites for the static, discrete-time and Kubo
//! relations.

use fdt_core::markov_maps::{ChannelFamily, LindbladGenerator, MarkovModel, DEFAULT_STEP};
use fdt_core::operator_core::{eig_hermitian, expectation, thermal_state};
use fdt_core::random::{random_hermitian, random_stinespring_family, rng_from_seed, FdtRng};
use fdt_core::response::{
    kubo_response, quantum_fdt_frequency_check, response_direct, response_fdt_continuous, response_fdt_discrete, Differentiation,
    QuantumFdtReport, TimeGrid,
};
use fdt_core::sld_metrology::{qfi, sld_for_family, sld_thermal, static_susceptibility, thermal_susceptibility_decomposed};
use fdt_core::{FdtError, HermitianOperator};

use crate::{CliError, ExperimentConfig, ResultTable};

/// Relative tolerance of the static relation against finite differences.
pub const STATIC_TOL: f64 = 1e-6;
/// Absolute tolerance of the discrete relation against the direct series.
pub const MAP_TOL: f64 = 1e-8;
/// Tolerance of `Σφ = χ^s`.
pub const STATIC_SUM_TOL: f64 = 1e-6;
/// Absolute tolerance of the continuous relation against Kubo.
pub const KUBO_TOL: f64 = 1e-6;
/// Peak-normalized tolerance of the frequency-domain relation.
pub const FREQUENCY_TOL: f64 = 1e-4;

/// Gibbs family `e^{−β(H₀−λA)}` with a probe observable B.
#[derive(Clone, Debug)]
pub struct ThermalInstance {
    pub h0: HermitianOperator,
    pub a: HermitianOperator,
    pub b: HermitianOperator,
    pub beta: f64,
}

impl ThermalInstance {
    pub fn random(rng: &mut FdtRng, dim: usize, beta: f64) -> Self {
        let h0 = random_hermitian(rng, dim, 2.0);
        let a = random_hermitian(rng, dim, 1.0);
        let b = random_hermitian(rng, dim, 1.0);
        Self { h0, a, b, beta }
    }

    /// Diagonal H₀ and A with B = A.
    pub fn commuting(rng: &mut FdtRng, dim: usize, beta: f64) -> Result<Self, CliError> {
        let diag = |m: HermitianOperator| -> Result<HermitianOperator, FdtError> {
            let e = eig_hermitian(&m)?;
            HermitianOperator::diagonal(e.eigenvalues.as_slice())
        };
        let h0 = diag(random_hermitian(rng, dim, 2.0))?;
        let a = diag(random_hermitian(rng, dim, 1.0))?;
        Ok(Self { h0, b: a.clone(), a, beta })
    }

    /// `∂_λ⟨B⟩_λ` at λ = 0 by Richardson-extrapolated central differences.
    pub fn susceptibility_fd(&self, b: &HermitianOperator, h: f64) -> Result<f64, FdtError> {
        let mean = |lambda: f64| -> Result<f64, FdtError> {
            let (rho, _) = thermal_state(&self.h0.add_scaled(-lambda, &self.a)?, self.beta)?;
            expectation(&rho, b)
        };
        let central = |h: f64| -> Result<f64, FdtError> { Ok((mean(h)? - mean(-h)?) / (2.0 * h)) };
        Ok((4.0 * central(0.5 * h)? - central(h)?) / 3.0)
    }

    /// Largest transition frequency of H₀.
    pub fn bandwidth(&self) -> Result<f64, FdtError> {
        let e = eig_hermitian(&self.h0)?.eigenvalues;
        Ok(e[e.len() - 1] - e[0])
    }
}

/// Default damping of the frequency-domain check, in units of `1/β`.
///
/// Damping broadens each transition into a Lorentzian, and the two sides
/// of the relation then differ by roughly `η/ω_nm` of the peak for slow
/// transitions.
pub const FREQUENCY_DAMPING: f64 = 5e-5;

/// Frequency-domain check with damping `η`, sampled at `0.4/ω_max` for
/// `20/η`. The step stays below the Nyquist limit `π/5ω_max` for ω up to
/// `4ω_max`.
pub fn frequency_check(
    inst: &ThermalInstance,
    b: &HermitianOperator,
    omegas: &[f64],
    damping: f64,
) -> Result<QuantumFdtReport, FdtError> {
    let w_max = inst.bandwidth()?;
    if !(w_max > 0.0) {
        return Err(FdtError::InvalidParameter { name: "H0", reason: "needs at least two distinct levels".into() });
    }
    let grid = TimeGrid::covering(20.0 / damping, 0.4 / w_max)?;
    quantum_fdt_frequency_check(&inst.h0, &inst.a, b, inst.beta, grid, omegas, damping)
}

fn rel_err(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Static susceptibility through the SLD against finite differences.
///
/// Rows: `instances` random Gibbs families (kind 0), one commuting family
/// with B = A (kind 1) and B = Λ₀ on the last random family (kind 2).
pub fn run_static_fdt(config: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let seed = config.seed();
    let instances = config.count("instances", config.instances, 20, 1)?;
    let dim = config.count("dim", config.dim, 4, 2)?;
    let beta = config.positive("beta", config.beta, 1.0)?;
    let mut rng = rng_from_seed(seed);
    let mut table =
        ResultTable::new(["instance", "kind", "chi_fdt", "chi_fd_oracle", "abs_err", "rel_err", "curie", "van_vleck", "qfi"]);
    table.meta("seed", seed);
    table.meta("instances", instances);
    table.meta("dim", dim);
    table.meta("beta", beta);

    let row = |table: &mut ResultTable, k: usize, kind: f64, inst: &ThermalInstance, b: &HermitianOperator| {
        let (pi, _) = thermal_state(&inst.h0, inst.beta)?;
        let sld = sld_thermal(&inst.h0, &inst.a, inst.beta)?;
        let chi = static_susceptibility(&pi, &sld, b)?;
        let oracle = inst.susceptibility_fd(b, 1e-3)?;
        let parts = thermal_susceptibility_decomposed(&inst.h0, &inst.a, inst.beta)?;
        let f = qfi(&pi, &sld)?;
        let err = rel_err(chi, oracle);
        table.push_row(vec![k as f64, kind, chi, oracle, (chi - oracle).abs(), err, parts.curie, parts.van_vleck, f])?;
        Ok::<_, CliError>((err, chi, f, parts, sld))
    };

    let mut worst: f64 = 0.0;
    let mut last = None;
    for k in 0..instances {
        let inst = ThermalInstance::random(&mut rng, dim, beta);
        let (err, _, _, _, sld) = row(&mut table, k, 0.0, &inst, &inst.b)?;
        worst = worst.max(err);
        last = Some((inst, sld));
    }

    let commuting = ThermalInstance::commuting(&mut rng, dim, beta)?;
    let (err, _, _, parts, _) = row(&mut table, instances, 1.0, &commuting, &commuting.b)?;
    worst = worst.max(err);
    let curie_only = parts.van_vleck.abs() <= 1e-12 * parts.total.abs();
    table.meta("commuting_curie_only", curie_only);

    let (inst, sld) = last.expect("at least one instance");
    let (err, chi, f, _, _) = row(&mut table, instances + 1, 2.0, &inst, &sld.lambda_op)?;
    worst = worst.max(err);

    table.meta("max_rel_err", worst);
    table.check("static_fdt_rel_err", worst, STATIC_TOL);
    table.check("sld_self_susceptibility_equals_qfi", rel_err(chi, f), 1e-10);
    table.check("commuting_van_vleck", parts.van_vleck.abs(), 1e-12 * parts.total.abs());
    Ok(table)
}

/// A random Stinespring family, or with `"constant"` the same channel for
/// every λ.
fn channel_family(config: &ExperimentConfig, rng: &mut FdtRng, dim: usize) -> Result<ChannelFamily, CliError> {
    let family = random_stinespring_family(rng, dim, 2);
    match config.family.as_deref().unwrap_or("random") {
        "random" => Ok(family),
        "constant" => Ok(ChannelFamily::constant(family.reference()?)),
        other => Err(CliError::Config(format!("family must be `random` or `constant`, got `{other}`"))),
    }
}

fn reference_kraus(family: &ChannelFamily) -> Result<fdt_core::KrausChannel, CliError> {
    match family.reference()? {
        MarkovModel::Kraus(k) => Ok(k),
        MarkovModel::Lindblad(_) => Err(CliError::Internal("expected a Kraus family".into())),
    }
}

/// Discrete-time relation against `Tr[B ξ₀ᵗ ξ₁(π₀)]`.
pub fn run_map_fdt(config: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let seed = config.seed();
    let dim = config.count("dim", config.dim, 3, 2)?;
    let t_max = config.positive("t_max", config.t_max, 50.0)?;
    if t_max.fract() != 0.0 {
        return Err(CliError::Config(format!("t_max counts channel steps and must be an integer, got {t_max}")));
    }
    let steps = t_max as usize;
    let mut rng = rng_from_seed(seed);
    let family = channel_family(config, &mut rng, dim)?;
    let b = random_hermitian(&mut rng, dim, 1.0);
    let k0 = reference_kraus(&family)?;
    let (pi0, sld) = sld_for_family(&family, DEFAULT_STEP)?;
    let fdt = response_fdt_discrete(&k0, &pi0, &sld, &b, steps)?;
    let direct = response_direct(&family, &b, steps)?;

    let mut table = ResultTable::new(["t", "phi_fdt", "phi_direct", "err"]);
    table.meta("seed", seed);
    table.meta("dim", dim);
    table.meta("t_max", steps);
    table.meta("family", config.family.as_deref().unwrap_or("random"));
    let mut worst: f64 = 0.0;
    for (k, (x, y)) in fdt.values().iter().zip(direct.values()).enumerate() {
        let err = (x - y).abs();
        worst = worst.max(err);
        table.push_row(vec![k as f64, *x, *y, err])?;
    }
    table.check("map_fdt_abs_err", worst, MAP_TOL);

    let chi = static_susceptibility(&pi0, &sld, &b)?;
    let gap = MarkovModel::Kraus(k0.clone()).superoperator().spectral_gap()?;
    table.meta("chi_static", chi);
    table.meta("spectral_gap", gap);
    if gap > 1e-3 {
        let long = ((1e-14f64).ln() / (1.0 - gap).ln()).ceil() as usize;
        let sum = response_fdt_discrete(&k0, &pi0, &sld, &b, long.max(steps))?.sum();
        table.meta("sum_phi", sum);
        table.check("static_sum", (sum - chi).abs(), STATIC_SUM_TOL);
    } else {
        table.meta("sum_phi", "skipped: spectral gap below 1e-3");
    }
    Ok(table)
}

/// Continuous SLD relation against Kubo in time (domain 0) and the
/// thermal FDT in frequency for B = A (domain 1).
pub fn run_kubo(config: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let seed = config.seed();
    let dim = config.count("dim", config.dim, 4, 2)?;
    let beta = config.positive("beta", config.beta, 1.0)?;
    let t_max = config.positive("t_max", config.t_max, 10.0)?;
    let dt = config.positive("dt", config.dt, 0.05)?;
    let mut rng = rng_from_seed(seed);
    let inst = ThermalInstance::random(&mut rng, dim, beta);
    let damping = config.positive("damping", config.damping, FREQUENCY_DAMPING / beta)?;
    let omegas = match &config.omegas {
        Some(w) if w.iter().all(|x| x.is_finite()) => w.clone(),
        Some(_) => return Err(CliError::Config("omegas must be finite".into())),
        None => {
            let points = config.count("omega_points", config.omega_points, 41, 2)?;
            ExperimentConfig::linspace(0.0, 4.0 * inst.bandwidth()?, points)
        }
    };

    let mut table = ResultTable::new(["domain", "x", "lhs", "rhs", "err"]);
    table.meta("seed", seed);
    table.meta("dim", dim);
    table.meta("beta", beta);
    table.meta("t_max", t_max);
    table.meta("dt", dt);
    table.meta("damping", damping);

    let grid = TimeGrid::covering(t_max, dt)?;
    let gen = LindbladGenerator::unitary(inst.h0.clone());
    let (pi, _) = thermal_state(&inst.h0, beta)?;
    let sld = sld_thermal(&inst.h0, &inst.a, beta)?;
    let lhs = response_fdt_continuous(&gen, &pi, &sld, &inst.b, grid, Differentiation::Generator)?;
    let rhs = kubo_response(&inst.h0, &inst.a, beta, &inst.b, grid)?;
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        let (x, y) = (lhs.values()[k], rhs.values()[k]);
        worst = worst.max((x - y).abs());
        table.push_row(vec![0.0, grid.time(k), x, y, (x - y).abs()])?;
    }
    table.check("kubo_abs_err", worst, KUBO_TOL);

    let report = frequency_check(&inst, &inst.a, &omegas, damping)?;
    for (k, w) in report.omegas.iter().enumerate() {
        table.push_row(vec![1.0, *w, report.chi_absorptive[k].re, report.tanh_correlation[k].re, report.deviation[k]])?;
    }
    table.check("frequency_fdt_peak_rel_err", report.max_deviation, FREQUENCY_TOL);
    Ok(table)
}
