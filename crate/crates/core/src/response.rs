//! Response functions from the SLD fluctuation-dissipation relation and
//! from reference routes (direct derivative of the dynamics, Kubo formula),
//! plus susceptibility spectra and driven susceptibilities.
//!
//! Discrete time: `φ_B(t) = −½⟨ΔB(t)Λ₀ + Λ₀ΔB(t)⟩₀` with
//! `ΔB(t) = B(t+1) − B(t)` and `B(t) = ξ̃₀ᵗ(B)`.
//! Continuous time: `φ_B(t) = −d/dt ½⟨B(t)Λ₀ + Λ₀B(t)⟩₀`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FdtError, Result};
use crate::markov_maps::{
    channel_derivative, fixed_point, stationary_state, Channel, ChannelFamily, LindbladGenerator, MarkovModel, DEFAULT_STEP,
};
use crate::operator_core::{
    check_dims, eig_hermitian, max_abs, thermal_populations, trace_product, CMatrix, DensityMatrix, HermitianOperator,
};
use crate::sld_metrology::SldResult;

/// Residual tolerated when checking that π₀ is invariant.
pub const INVARIANCE_TOL: f64 = 1e-9;

/// Real samples on the grid `t_k = t0 + k·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl ResponseSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(FdtError::invalid("dt", format!("must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(FdtError::invalid("t0", "must be finite"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FdtError::NonFinite("ResponseSeries values"));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn zeros(t0: f64, dt: f64, len: usize) -> Result<Self> {
        Self::new(t0, dt, vec![0.0; len])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain sum, the discrete-time analogue of the integral.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integral(&self) -> f64 {
        self.running_integral().last().unwrap_or(0.0)
    }

    /// Cumulative trapezoid, starting from 0 at `t0`.
    pub fn running_integral(&self) -> Self {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                acc += 0.5 * self.dt * (self.values[k - 1] + v);
            }
            out.push(acc);
        }
        Self { t0: self.t0, dt: self.dt, values: out }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.t0, self.dt, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Largest pointwise difference to a series on the same grid.
    pub fn max_difference(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        let same = (self.t0 - other.t0).abs() <= 1e-12 * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && self.len() == other.len();
        if same {
            Ok(())
        } else {
            Err(FdtError::GridMismatch(format!(
                "(t0 {}, dt {}, len {}) vs (t0 {}, dt {}, len {})",
                self.t0,
                self.dt,
                self.len(),
                other.t0,
                other.dt,
                other.len()
            )))
        }
    }
}

/// Uniform grid `t_k = k·dt`, `k = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(FdtError::invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid reaching `t_max` with steps no longer than `dt`.
    pub fn covering(t_max: f64, dt: f64) -> Result<Self> {
        let n = (t_max / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t_max / n as f64, n)
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }
}

/// How `φ = −dc/dt` is obtained in [`response_fdt_continuous`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Differentiation {
    /// Fourth-order finite differences of c(t), one-sided at the ends.
    #[default]
    Stencil,
    /// `dc/dt = ½⟨𝓛†(B(t))Λ₀ + Λ₀𝓛†(B(t))⟩₀` exactly.
    Generator,
}

/// Fourth-order derivative of uniformly sampled data; needs five samples.
pub fn stencil_derivative(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 5 {
        return Err(FdtError::invalid("values", format!("need at least 5 samples, got {n}")));
    }
    let f = values;
    let s = 1.0 / (12.0 * dt);
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for k in 2..n - 2 {
        d[k] = (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) * s;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * s;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) * s;
    Ok(d)
}

/// `φ = −dc/dt` from a sampled correlation `c(t)`.
pub fn response_from_correlation(c: &ResponseSeries) -> Result<ResponseSeries> {
    let d = stencil_derivative(c.values(), c.dt())?;
    ResponseSeries::new(c.t0(), c.dt(), d.into_iter().map(|x| -x).collect())
}

/// `½(Λπ + πΛ)`, so that `½⟨XΛ + ΛX⟩ = Re Tr[X·S]` for Hermitian X.
fn symmetrized_sld(pi0: &DensityMatrix, sld: &SldResult) -> CMatrix {
    let lp = sld.lambda_op.matrix() * pi0.matrix();
    (&lp + lp.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Discrete-time SLD relation for a channel ξ₀ with invariant state π₀.
/// Returns `t_max + 1` samples.
pub fn response_fdt_discrete(
    channel0: &dyn Channel,
    pi0: &DensityMatrix,
    sld: &SldResult,
    b: &HermitianOperator,
    t_max: usize,
) -> Result<ResponseSeries> {
    let d = channel0.dim();
    check_dims(d, pi0.dim())?;
    check_dims(d, b.dim())?;
    check_dims(d, sld.lambda_op.dim())?;
    let residual = max_abs(&(channel0.map_matrix(pi0.matrix()) - pi0.matrix()));
    if residual > INVARIANCE_TOL {
        return Err(FdtError::NotInvariant { residual, tolerance: INVARIANCE_TOL });
    }
    let s = symmetrized_sld(pi0, sld);
    let mut bt = b.matrix().clone();
    let mut c_prev = trace_product(&bt, &s).re;
    let mut out = Vec::with_capacity(t_max + 1);
    for _ in 0..=t_max {
        bt = channel0.adjoint_map_matrix(&bt);
        let c = trace_product(&bt, &s).re;
        out.push(-(c - c_prev));
        c_prev = c;
    }
    ResponseSeries::new(0.0, 1.0, out)
}

fn discrete_reference(family: &ChannelFamily) -> Result<(crate::markov_maps::KrausChannel, DensityMatrix)> {
    match family.reference()? {
        MarkovModel::Kraus(k) => {
            let pi = fixed_point(&k)?;
            Ok((k, pi))
        }
        MarkovModel::Lindblad(_) => Err(FdtError::invalid("family", "expected a discrete-time (Kraus) family")),
    }
}

/// `φ_B(t) = Tr[B ξ₀ᵗ ξ₁(π₀)]` with ξ₁ from central differences.
pub fn response_direct(family: &ChannelFamily, b: &HermitianOperator, t_max: usize) -> Result<ResponseSeries> {
    let (k0, pi0) = discrete_reference(family)?;
    check_dims(k0.dim(), b.dim())?;
    let xi1 = channel_derivative(family, DEFAULT_STEP)?;
    let mut x = xi1.apply(pi0.matrix());
    let mut out = Vec::with_capacity(t_max + 1);
    for _ in 0..=t_max {
        out.push(trace_product(b.matrix(), &x).re);
        x = k0.map_matrix(&x);
    }
    ResponseSeries::new(0.0, 1.0, out)
}

/// Response from full nonlinear propagation: a kick `λ(0) = ±ε` applied to
/// π₀, then free evolution, central-differenced in ε.
pub fn response_nonlinear(family: &ChannelFamily, b: &HermitianOperator, t_max: usize, eps: f64) -> Result<ResponseSeries> {
    let (k0, pi0) = discrete_reference(family)?;
    check_dims(k0.dim(), b.dim())?;
    let l0 = family.lambda0();
    let kicked = |sign: f64| -> Result<CMatrix> {
        match family.evaluate(l0 + sign * eps)? {
            MarkovModel::Kraus(k) => Ok(k.map_matrix(pi0.matrix())),
            MarkovModel::Lindblad(_) => Err(FdtError::invalid("family", "expected a discrete-time (Kraus) family")),
        }
    };
    let mut plus = kicked(1.0)?;
    let mut minus = kicked(-1.0)?;
    let mut out = Vec::with_capacity(t_max + 1);
    for _ in 0..=t_max {
        let diff = trace_product(b.matrix(), &plus).re - trace_product(b.matrix(), &minus).re;
        out.push(diff / (2.0 * eps));
        plus = k0.map_matrix(&plus);
        minus = k0.map_matrix(&minus);
    }
    ResponseSeries::new(0.0, 1.0, out)
}

/// Continuous-time reference `φ_B(t) = Tr[B e^{t𝓛₀} 𝓛₁(π₀)]`.
pub fn response_direct_continuous(family: &ChannelFamily, b: &HermitianOperator, grid: TimeGrid) -> Result<ResponseSeries> {
    let gen = match family.reference()? {
        MarkovModel::Lindblad(g) => g,
        MarkovModel::Kraus(_) => return Err(FdtError::invalid("family", "expected a Lindblad family")),
    };
    check_dims(gen.dim(), b.dim())?;
    let pi0 = stationary_state(&gen)?;
    let l1 = channel_derivative(family, DEFAULT_STEP)?;
    let step = gen.to_channel(grid.dt)?;
    let mut x = l1.apply(pi0.matrix());
    let mut out = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        out.push(trace_product(b.matrix(), &x).re);
        x = step.map_matrix(&x);
    }
    ResponseSeries::new(0.0, grid.dt, out)
}

/// `c(t) = ½⟨B(t)Λ₀ + Λ₀B(t)⟩₀` with `B(t) = e^{t𝓛†}B`.
pub fn sld_correlation_continuous(
    gen: &LindbladGenerator,
    pi0: &DensityMatrix,
    sld: &SldResult,
    b: &HermitianOperator,
    grid: TimeGrid,
) -> Result<ResponseSeries> {
    Ok(continuous_series(gen, pi0, sld, b, grid, false)?.0)
}

fn continuous_series(
    gen: &LindbladGenerator,
    pi0: &DensityMatrix,
    sld: &SldResult,
    b: &HermitianOperator,
    grid: TimeGrid,
    with_rate: bool,
) -> Result<(ResponseSeries, Vec<f64>)> {
    let d = gen.dim();
    check_dims(d, pi0.dim())?;
    check_dims(d, b.dim())?;
    check_dims(d, sld.lambda_op.dim())?;
    let residual = max_abs(&gen.apply(pi0.matrix()));
    if residual > INVARIANCE_TOL {
        return Err(FdtError::NotInvariant { residual, tolerance: INVARIANCE_TOL });
    }
    let s = symmetrized_sld(pi0, sld);
    let step = gen.to_channel(grid.dt)?;
    let mut bt = b.matrix().clone();
    let mut c = Vec::with_capacity(grid.len());
    let mut rate = Vec::new();
    for k in 0..grid.len() {
        if k > 0 {
            bt = step.adjoint_map_matrix(&bt);
        }
        c.push(trace_product(&bt, &s).re);
        if with_rate {
            rate.push(trace_product(&gen.apply_adjoint(&bt), &s).re);
        }
    }
    Ok((ResponseSeries::new(0.0, grid.dt, c)?, rate))
}

/// Continuous-time SLD relation for a generator with stationary state π₀.
pub fn response_fdt_continuous(
    gen: &LindbladGenerator,
    pi0: &DensityMatrix,
    sld: &SldResult,
    b: &HermitianOperator,
    grid: TimeGrid,
    method: Differentiation,
) -> Result<ResponseSeries> {
    match method {
        Differentiation::Stencil => {
            let (c, _) = continuous_series(gen, pi0, sld, b, grid, false)?;
            response_from_correlation(&c)
        }
        Differentiation::Generator => {
            let (_, rate) = continuous_series(gen, pi0, sld, b, grid, true)?;
            ResponseSeries::new(0.0, grid.dt, rate.into_iter().map(|x| -x).collect())
        }
    }
}

/// Sum of `coef·e^{iωt}` over `(coef, ω)` pairs on a uniform grid, using a
/// phase recurrence that is resynchronized periodically.
fn oscillator_sum(pairs: &[(Complex64, f64)], t0: f64, dt: f64, len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for &(coef, omega) in pairs {
        let rot = Complex64::from_polar(1.0, omega * dt);
        let mut z = Complex64::new(0.0, 0.0);
        for (k, o) in out.iter_mut().enumerate() {
            if k % 1024 == 0 {
                z = Complex64::from_polar(1.0, omega * (t0 + k as f64 * dt));
            } else {
                z *= rot;
            }
            *o += coef * z;
        }
    }
    out
}

struct ThermalPairs {
    /// `(p_n, E_n)` and operators in the energy basis.
    populations: Vec<f64>,
    energies: Vec<f64>,
    a: CMatrix,
    b: CMatrix,
    degeneracy_tol: f64,
}

impl ThermalPairs {
    fn new(h0: &HermitianOperator, a: &HermitianOperator, b: &HermitianOperator, beta: f64) -> Result<Self> {
        check_dims(h0.dim(), a.dim())?;
        check_dims(h0.dim(), b.dim())?;
        let spec = eig_hermitian(h0)?;
        let energies: Vec<f64> = spec.eigenvalues.iter().cloned().collect();
        let populations = thermal_populations(&energies, beta)?;
        let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        Ok(Self {
            populations,
            energies,
            a: spec.to_eigenbasis(a.matrix()),
            b: spec.to_eigenbasis(b.matrix()),
            degeneracy_tol: crate::sld_metrology::DEGENERACY_TOL * scale,
        })
    }

    fn pairs(&self, weight: impl Fn(f64, f64) -> f64, oscillating_only: bool) -> Vec<(Complex64, f64)> {
        let n = self.energies.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let omega = self.energies[i] - self.energies[j];
                if oscillating_only && omega.abs() <= self.degeneracy_tol {
                    continue;
                }
                let coef = self.b[(i, j)] * self.a[(j, i)] * weight(self.populations[i], self.populations[j]);
                if coef != Complex64::new(0.0, 0.0) {
                    out.push((coef, omega));
                }
            }
        }
        out
    }
}

fn real_series(values: Vec<Complex64>, t0: f64, dt: f64, scale: f64) -> Result<ResponseSeries> {
    let worst = values.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if worst > 1e-10 * scale.max(1.0) {
        return Err(FdtError::ComplexResidue(worst));
    }
    ResponseSeries::new(t0, dt, values.into_iter().map(|z| z.re).collect())
}

/// Kubo formula `φ_B(t) = i⟨[B(t), A]⟩₀` with `B(t) = e^{iH₀t}Be^{−iH₀t}`,
/// evaluated in the energy eigenbasis.
pub fn kubo_response(
    h0: &HermitianOperator,
    a: &HermitianOperator,
    beta: f64,
    b: &HermitianOperator,
    grid: TimeGrid,
) -> Result<ResponseSeries> {
    let tp = ThermalPairs::new(h0, a, b, beta)?;
    let pairs: Vec<_> = tp.pairs(|pn, pm| pn - pm, false).into_iter().map(|(c, w)| (c * Complex64::new(0.0, 1.0), w)).collect();
    let scale = a.max_norm() * b.max_norm();
    real_series(oscillator_sum(&pairs, 0.0, grid.dt, grid.len()), 0.0, grid.dt, scale)
}

/// Thermal symmetrized correlation `C_BA(t) = ½⟨B(t)A + AB(t)⟩₀ − ⟨B⟩₀⟨A⟩₀`
/// at times `sign·t_k`. With `oscillating_only`, time-independent
/// contributions from degenerate level pairs are dropped as well; they
/// carry no weight at ω ≠ 0.
pub fn thermal_correlation(
    h0: &HermitianOperator,
    a: &HermitianOperator,
    b: &HermitianOperator,
    beta: f64,
    grid: TimeGrid,
    sign: f64,
    oscillating_only: bool,
) -> Result<ResponseSeries> {
    let tp = ThermalPairs::new(h0, a, b, beta)?;
    let pairs: Vec<_> = tp.pairs(|pn, pm| 0.5 * (pn + pm), oscillating_only).into_iter().map(|(c, w)| (c, sign * w)).collect();
    let mut values = oscillator_sum(&pairs, 0.0, grid.dt, grid.len());
    if !oscillating_only {
        let n = tp.energies.len();
        let mean = |m: &CMatrix| (0..n).map(|k| tp.populations[k] * m[(k, k)].re).sum::<f64>();
        let shift = mean(&tp.b) * mean(&tp.a);
        values.iter_mut().for_each(|v| *v -= shift);
    }
    let scale = a.max_norm() * b.max_norm();
    real_series(values, 0.0, grid.dt, scale)
}

/// Complex spectrum on an arbitrary ω list.
#[derive(Clone, Debug, PartialEq)]
pub struct SusceptibilitySpectrum {
    pub omegas: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl SusceptibilitySpectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Largest `|χ(−ω) − conj χ(ω)|` over ω values present with both signs.
    pub fn reality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &w) in self.omegas.iter().enumerate() {
            if let Some(j) = self.omegas.iter().position(|&v| v == -w) {
                worst = worst.max((self.values[j] - self.values[i].conj()).norm());
            }
        }
        worst
    }

    /// Index of the largest |χ|.
    pub fn argmax(&self) -> Option<usize> {
        let m = self.magnitudes();
        (0..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b]))
    }
}

/// `∫ f(t) e^{(iω−η)t} dt` by trapezoid over the samples of `f`.
fn damped_transform(values: &[f64], t0: f64, dt: f64, omega: f64, damping: f64) -> Complex64 {
    let s = Complex64::new(-damping, omega);
    let rot = (s * dt).exp();
    let n = values.len();
    let mut z = Complex64::new(0.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        if k % 1024 == 0 {
            z = (s * (t0 + k as f64 * dt)).exp();
        } else {
            z *= rot;
        }
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        acc += z * (w * v);
    }
    acc * dt
}

/// `χ_B(ω) = ∫₀^∞ φ_B(t) e^{iωt} dt` by damped trapezoid.
///
/// Without damping the series must have decayed to 1e-8 of its peak over
/// its last samples. The ω points are independent and evaluated in
/// parallel; results are assembled by index.
pub fn generalized_susceptibility(phi: &ResponseSeries, omegas: &[f64], damping: f64) -> Result<SusceptibilitySpectrum> {
    if !(damping >= 0.0) || !damping.is_finite() {
        return Err(FdtError::invalid("damping", format!("must be nonnegative, got {damping}")));
    }
    let peak = phi.max_abs();
    if damping == 0.0 && peak > 0.0 {
        let tail_len = (phi.len() / 100).clamp(1, 64);
        let tail = phi.values()[phi.len() - tail_len..].iter().fold(0.0f64, |m, v| m.max(v.abs())) / peak;
        if tail > 1e-8 {
            return Err(FdtError::NotDecayed { tail });
        }
    }
    let values = omegas.par_iter().map(|&w| damped_transform(phi.values(), phi.t0(), phi.dt(), w, damping)).collect();
    Ok(SusceptibilitySpectrum { omegas: omegas.to_vec(), values })
}

/// Both sides of the thermal quantum FDT `χ''_BA(ω) = tanh(βω/2)·C̃_BA(ω)`.
#[derive(Clone, Debug)]
pub struct QuantumFdtReport {
    pub omegas: Vec<f64>,
    /// Absorptive part `(χ_BA(ω) − conj χ_AB(ω))/2i`; equals Im χ for B = A.
    pub chi_absorptive: Vec<Complex64>,
    /// `tanh(βω/2)·C̃_BA(ω)`.
    pub tanh_correlation: Vec<Complex64>,
    /// `|χ'' − tanh·C̃|` at each ω, divided by `max_ω |χ''|`.
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
}

/// Evaluates both sides of the quantum FDT with the same damped quadrature.
///
/// The damping η broadens each transition into a Lorentzian of width η;
/// near a resonance ω_r the two sides then differ by about
/// `(β/2)sech²(βω_r/2)·η` relative to the peak, which sets the achievable
/// agreement. The grid must extend to several `1/η`.
pub fn quantum_fdt_frequency_check(
    h0: &HermitianOperator,
    a: &HermitianOperator,
    b: &HermitianOperator,
    beta: f64,
    grid: TimeGrid,
    omegas: &[f64],
    damping: f64,
) -> Result<QuantumFdtReport> {
    let same = a == b;
    let phi_ba = kubo_response(h0, a, beta, b, grid)?;
    let phi_ab = if same { phi_ba.clone() } else { kubo_response(h0, b, beta, a, grid)? };
    let c_plus = thermal_correlation(h0, a, b, beta, grid, 1.0, true)?;
    let c_minus = if same { c_plus.clone() } else { thermal_correlation(h0, a, b, beta, grid, -1.0, true)? };
    let dt = grid.dt;
    let rows: Vec<(Complex64, Complex64)> = omegas
        .par_iter()
        .map(|&w| {
            let chi_ba = damped_transform(phi_ba.values(), 0.0, dt, w, damping);
            let chi_ab = if same { chi_ba } else { damped_transform(phi_ab.values(), 0.0, dt, w, damping) };
            let absorptive = (chi_ba - chi_ab.conj()) / Complex64::new(0.0, 2.0);
            let forward = damped_transform(c_plus.values(), 0.0, dt, w, damping);
            let backward = damped_transform(c_minus.values(), 0.0, dt, -w, damping);
            let c_tilde = forward + backward;
            (absorptive, c_tilde * (0.5 * beta * w).tanh())
        })
        .collect();
    let chi_absorptive: Vec<_> = rows.iter().map(|r| r.0).collect();
    let tanh_correlation: Vec<_> = rows.iter().map(|r| r.1).collect();
    let peak = chi_absorptive.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let norm = if peak > 0.0 { peak } else { 1.0 };
    let deviation: Vec<f64> = rows.iter().map(|(x, y)| (x - y).norm() / norm).collect();
    let max_deviation = deviation.iter().cloned().fold(0.0, f64::max);
    Ok(QuantumFdtReport { omegas: omegas.to_vec(), chi_absorptive, tanh_correlation, deviation, max_deviation })
}

/// Perturbation protocol λ(t) = J₀·k(t); the susceptibility uses the
/// kernel `k(t) = ∂_{J₀}λ(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DriveProtocol {
    /// `λ(t) = J₀`.
    Constant { j0: f64 },
    /// `λ(t) = J₀(1 − cos νt)`. At ν = 0 the kernel vanishes identically.
    Sinusoidal { j0: f64, nu: f64 },
    /// Kernel samples on a grid starting at t = 0 with the response's step.
    Tabulated { j0: f64, kernel: ResponseSeries },
}

impl DriveProtocol {
    pub fn j0(&self) -> f64 {
        match self {
            DriveProtocol::Constant { j0 } | DriveProtocol::Sinusoidal { j0, .. } | DriveProtocol::Tabulated { j0, .. } => *j0,
        }
    }

    /// `∂_{J₀}λ(t)` at sample `k` of a grid with step `dt`.
    pub fn kernel(&self, k: usize, dt: f64) -> f64 {
        match self {
            DriveProtocol::Constant { .. } => 1.0,
            DriveProtocol::Sinusoidal { nu, .. } => 1.0 - (nu * dt * k as f64).cos(),
            DriveProtocol::Tabulated { kernel, .. } => kernel.values()[k],
        }
    }

    /// `λ(t_k)`.
    pub fn value(&self, k: usize, dt: f64) -> f64 {
        self.j0() * self.kernel(k, dt)
    }
}

/// `χ(t_n) = ∫₀^{t_n} φ(t_n − s) k(s) ds` by trapezoid, directly in O(N²).
pub fn convolve_direct(phi: &ResponseSeries, protocol: &DriveProtocol) -> Result<ResponseSeries> {
    check_protocol_grid(phi, protocol)?;
    let dt = phi.dt();
    let f = phi.values();
    let kern: Vec<f64> = (0..f.len()).map(|k| protocol.kernel(k, dt)).collect();
    let out = (0..f.len())
        .map(|n| {
            if n == 0 {
                return 0.0;
            }
            let mut acc = 0.5 * (f[n] * kern[0] + f[0] * kern[n]);
            for j in 1..n {
                acc += f[n - j] * kern[j];
            }
            acc * dt
        })
        .collect();
    ResponseSeries::new(0.0, dt, out)
}

fn check_protocol_grid(phi: &ResponseSeries, protocol: &DriveProtocol) -> Result<()> {
    if phi.t0() != 0.0 {
        return Err(FdtError::GridMismatch(format!("response must start at t = 0, starts at {}", phi.t0())));
    }
    if let DriveProtocol::Tabulated { kernel, .. } = protocol {
        if kernel.t0() != 0.0 || (kernel.dt() - phi.dt()).abs() > 1e-12 * phi.dt() || kernel.len() < phi.len() {
            return Err(FdtError::GridMismatch(format!(
                "kernel (t0 {}, dt {}, len {}) does not cover response (dt {}, len {})",
                kernel.t0(),
                kernel.dt(),
                kernel.len(),
                phi.dt(),
                phi.len()
            )));
        }
    }
    Ok(())
}

/// `χ_B(t) = ∫₀ᵗ φ(t − s)·∂_{J₀}λ(s) ds` by trapezoid.
///
/// Constant and sinusoidal kernels run in O(N) by splitting
/// `cos ν(t−s) = cos νt cos νs + sin νt sin νs`; tabulated kernels fall
/// back to [`convolve_direct`].
pub fn time_dependent_susceptibility(phi: &ResponseSeries, protocol: &DriveProtocol) -> Result<ResponseSeries> {
    check_protocol_grid(phi, protocol)?;
    let dt = phi.dt();
    match protocol {
        DriveProtocol::Constant { .. } => Ok(phi.running_integral()),
        DriveProtocol::Sinusoidal { nu, .. } => {
            let base = phi.running_integral();
            let cos_part = ResponseSeries::new(
                0.0,
                dt,
                phi.values().iter().enumerate().map(|(k, v)| v * (nu * dt * k as f64).cos()).collect(),
            )?
            .running_integral();
            let sin_part = ResponseSeries::new(
                0.0,
                dt,
                phi.values().iter().enumerate().map(|(k, v)| v * (nu * dt * k as f64).sin()).collect(),
            )?
            .running_integral();
            let out = (0..phi.len())
                .map(|n| {
                    let t = dt * n as f64;
                    base.values()[n] - (nu * t).cos() * cos_part.values()[n] - (nu * t).sin() * sin_part.values()[n]
                })
                .collect();
            ResponseSeries::new(0.0, dt, out)
        }
        DriveProtocol::Tabulated { .. } => convolve_direct(phi, protocol),
    }
}

/// `F(B)_t = |χ_B(t)|·√(n/Var(B)₀)`.
pub fn sensitivity(chi_t: &ResponseSeries, var_b0: f64, n: u64) -> Result<ResponseSeries> {
    if !(var_b0 > 0.0) || !var_b0.is_finite() {
        return Err(FdtError::ZeroVariance(var_b0));
    }
    if n == 0 {
        return Err(FdtError::invalid("n", "must be positive"));
    }
    let factor = (n as f64 / var_b0).sqrt();
    chi_t.map(|x| x.abs() * factor)
}

/// Late-time oscillation of a driven susceptibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillationFit {
    /// Half the peak-to-trough range over the window.
    pub amplitude: f64,
    /// Least-squares fit `offset + R cos(νt + α)` over the window.
    pub fitted_amplitude: f64,
    pub phase: f64,
    pub offset: f64,
}

/// Analyses the last 20% of `series` at drive frequency `nu`.
pub fn late_time_oscillation(series: &ResponseSeries, nu: f64) -> Result<OscillationFit> {
    let n = series.len();
    let start = n - n / 5;
    if n - start < 3 {
        return Err(FdtError::invalid("series", "too short for a late-time window"));
    }
    let window = &series.values()[start..];
    let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
    // Normal equations for y ≈ c0 + c1 cos νt + c2 sin νt.
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (k, &y) in window.iter().enumerate() {
        let t = series.time(start + k);
        let row = nalgebra::Vector3::new(1.0, (nu * t).cos(), (nu * t).sin());
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata.lu().solve(&aty).ok_or(FdtError::Singular("oscillation fit"))?;
    // c1 cos νt + c2 sin νt = R cos(νt + α) with R cos α = c1, R sin α = −c2.
    let fitted_amplitude = coef[1].hypot(coef[2]);
    let phase = (-coef[2]).atan2(coef[1]);
    Ok(OscillationFit { amplitude: 0.5 * (hi - lo), fitted_amplitude, phase, offset: coef[0] })
}
