//! Two detuned oscillators, each damped by its own thermal bath, coupled by
//! `H_J = −J(a₁†a₂ + a₂†a₁)`.
//!
//! Quadratures are ordered `R = (x₁, x₂, p₁, p₂)` with `x = (a† + a)/√2`,
//! `p = i(a† − a)/√2`. A quadratic observable is `½Σ Q_jk(R_jR_k + R_kR_j)`
//! plus a constant, and states are zero-mean Gaussian, so everything
//! reduces to 4×4 real matrices. The [`fock`] submodule builds the same
//! model on a truncated Fock basis as an independent check.
//!
//! The coupling plays the role of λ with `A = a₁†a₂ + a₂†a₁ = x₁x₂ + p₁p₂`.

pub mod fock;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use num_complex::Complex64;

use crate::error::{FdtError, Result};
use crate::operator_core::{eig_hermitian, CMatrix, HermitianOperator};
use crate::response::{ResponseSeries, TimeGrid};

/// Symmetry tolerance for covariance and coefficient matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Allowed negativity of `σ + iΩ/2`.
pub const UNCERTAINTY_TOL: f64 = 1e-10;

/// Bose occupation `1/(e^{ω/T} − 1)`.
pub fn bose(omega: f64, temperature: f64) -> f64 {
    1.0 / (omega / temperature).exp_m1()
}

/// Model parameters. Defaults: ω = 1, δ = 0.1, T₁ = 1, T₂ = 2, γ = 0.01, J = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorParams {
    pub omega: f64,
    pub delta: f64,
    pub coupling: f64,
    pub gamma: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self { omega: 1.0, delta: 0.1, coupling: 0.0, gamma: 0.01, t1: 1.0, t2: 2.0 }
    }
}

impl OscillatorParams {
    pub fn with_coupling(self, coupling: f64) -> Self {
        Self { coupling, ..self }
    }

    pub fn omega1(&self) -> f64 {
        self.omega
    }

    pub fn omega2(&self) -> f64 {
        self.omega + self.delta
    }

    pub fn n1(&self) -> f64 {
        bose(self.omega1(), self.t1)
    }

    pub fn n2(&self) -> f64 {
        bose(self.omega2(), self.t2)
    }

    /// Relabels the oscillators: mode 2 and bath 2 become mode 1 and bath 1.
    pub fn swapped(&self) -> Self {
        Self { omega: self.omega + self.delta, delta: -self.delta, t1: self.t2, t2: self.t1, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega, self.delta, self.coupling, self.gamma, self.t1, self.t2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FdtError::NonFinite("oscillator parameters"));
        }
        if !(self.omega1() > 0.0) || !(self.omega2() > 0.0) {
            return Err(FdtError::invalid("omega", "both mode frequencies must be positive"));
        }
        if !(self.gamma > 0.0) {
            return Err(FdtError::invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.t1 > 0.0) || !(self.t2 > 0.0) {
            return Err(FdtError::invalid("T", format!("temperatures must be positive, got {} and {}", self.t1, self.t2)));
        }
        if self.coupling * self.coupling >= self.omega1() * self.omega2() {
            return Err(FdtError::invalid("J", "coupling must satisfy J² < ω₁ω₂"));
        }
        Ok(())
    }

    fn require_uncoupled(&self) -> Result<()> {
        self.validate()?;
        if self.coupling != 0.0 {
            return Err(FdtError::invalid("J", "this quantity is defined at J = 0"));
        }
        Ok(())
    }
}

/// `Ω` with `[R_j, R_k] = iΩ_jk`.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut w = Matrix4::zeros();
    w[(0, 2)] = 1.0;
    w[(1, 3)] = 1.0;
    w[(2, 0)] = -1.0;
    w[(3, 1)] = -1.0;
    w
}

/// Drift `A` of `dR/dt = AR` (Heisenberg picture, damping included).
pub fn drift_matrix(p: &OscillatorParams) -> Matrix4<f64> {
    let (w1, w2, j) = (p.omega1(), p.omega2(), p.coupling);
    let h = Matrix4::new(w1, -j, 0.0, 0.0, -j, w2, 0.0, 0.0, 0.0, 0.0, w1, -j, 0.0, 0.0, -j, w2);
    symplectic_form() * h - Matrix4::identity() * (0.5 * p.gamma)
}

/// Diffusion `D` in `dσ/dt = Aσ + σAᵀ + D`.
pub fn diffusion_matrix(p: &OscillatorParams) -> Matrix4<f64> {
    let (s1, s2) = (p.n1() + 0.5, p.n2() + 0.5);
    Matrix4::from_diagonal(&Vector4::new(s1, s2, s1, s2)) * p.gamma
}

/// Solves `Aσ + σAᵀ + D = 0` through its 16×16 Kronecker form.
pub fn solve_continuous_lyapunov(a: &Matrix4<f64>, d: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let mut k = SMatrix::<f64, 16, 16>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                // (I⊗A)vec σ and (A⊗I)vec σ with column-major vec index i + 4j.
                k[(i + 4 * j, l + 4 * j)] += a[(i, l)];
                k[(i + 4 * j, i + 4 * l)] += a[(j, l)];
            }
        }
    }
    let rhs = SVector::<f64, 16>::from_iterator(d.iter().map(|v| -v));
    let x = k.lu().solve(&rhs).ok_or(FdtError::Singular("continuous Lyapunov equation"))?;
    let s = Matrix4::from_iterator(x.iter().cloned());
    Ok((s + s.transpose()) * 0.5)
}

/// Propagator `M(t) = e^{At}` of the first moments.
pub fn propagator(p: &OscillatorParams, t: f64) -> Matrix4<f64> {
    (drift_matrix(p) * t).exp()
}

/// Zero-mean Gaussian state given by its covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: Vector4<f64>,
    cov: Matrix4<f64>,
}

impl GaussianState {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(FdtError::NonFinite("Gaussian state"));
        }
        let asym = (cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * cov.amax().max(1.0) {
            return Err(FdtError::NotHermitian { deviation: asym, tolerance: SYMMETRY_TOL });
        }
        let cov = (cov + cov.transpose()) * 0.5;
        let w = symplectic_form();
        let m = CMatrix::from_fn(4, 4, |i, j| Complex64::new(cov[(i, j)], 0.5 * w[(i, j)]));
        let min = eig_hermitian(&HermitianOperator::new(m)?)?.eigenvalues[0];
        if min < -UNCERTAINTY_TOL {
            return Err(FdtError::Uncertainty(min));
        }
        Ok(Self { mean, cov })
    }

    pub fn zero_mean(cov: Matrix4<f64>) -> Result<Self> {
        Self::new(Vector4::zeros(), cov)
    }

    /// Product of thermal states with occupations `n1`, `n2`.
    pub fn product_thermal(n1: f64, n2: f64) -> Result<Self> {
        Self::zero_mean(Matrix4::from_diagonal(&Vector4::new(n1 + 0.5, n2 + 0.5, n1 + 0.5, n2 + 0.5)))
    }

    /// Uncoupled steady state `π₀`.
    pub fn reference(p: &OscillatorParams) -> Result<Self> {
        p.validate()?;
        Self::product_thermal(p.n1(), p.n2())
    }

    pub fn mean(&self) -> &Vector4<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix4<f64> {
        &self.cov
    }
}

/// Steady-state covariance from its closed form.
///
/// With `ζ = (γ²+δ²)/(4J²+γ²+δ²)`, `D = 2J²(N₁+N₂+1)/(γ²+δ²)` and
/// `C = J(N₁−N₂)/(γ²+δ²)`: diagonal `ζ(D + N_i + ½)`,
/// `σ₁₂ = σ₃₄ = ζδC`, `σ₁₄ = −σ₂₃ = ζγC`.
pub fn steady_state_cm(p: &OscillatorParams) -> Result<GaussianState> {
    p.validate()?;
    let (n1, n2) = (p.n1(), p.n2());
    let (g, d, j) = (p.gamma, p.delta, p.coupling);
    let g2d2 = g * g + d * d;
    let zeta = g2d2 / (4.0 * j * j + g2d2);
    let dd = 2.0 * j * j * (n1 + n2 + 1.0) / g2d2;
    let c = j * (n1 - n2) / g2d2;
    let (a1, a2) = (zeta * (dd + n1 + 0.5), zeta * (dd + n2 + 0.5));
    let (u, v) = (zeta * d * c, zeta * g * c);
    #[rustfmt::skip]
    let cov = Matrix4::new(
        a1, u,  0.0, v,
        u,  a2, -v,  0.0,
        0.0, -v, a1, u,
        v,  0.0, u,  a2,
    );
    GaussianState::zero_mean(cov)
}

/// Steady-state covariance from the Lyapunov equation.
pub fn steady_state_lyapunov(p: &OscillatorParams) -> Result<GaussianState> {
    p.validate()?;
    GaussianState::zero_mean(solve_continuous_lyapunov(&drift_matrix(p), &diffusion_matrix(p))?)
}

/// `∂_J σ^∞` at J = 0 from the closed form.
pub fn steady_state_derivative(p: &OscillatorParams) -> Result<Matrix4<f64>> {
    p.require_uncoupled()?;
    let k = (p.n1() - p.n2()) / (p.gamma * p.gamma + p.delta * p.delta);
    let (u, v) = (p.delta * k, p.gamma * k);
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, u,  0.0, v,
        u,  0.0, -v, 0.0,
        0.0, -v, 0.0, u,
        v,  0.0, u,  0.0,
    );
    Ok(m)
}

/// `½Σ Q_jk(R_jR_k + R_kR_j) + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObservable {
    pub coeffs: Matrix4<f64>,
    pub offset: f64,
}

impl QuadraticObservable {
    pub fn new(coeffs: Matrix4<f64>, offset: f64) -> Result<Self> {
        let asym = (coeffs - coeffs.transpose()).amax();
        if asym > SYMMETRY_TOL * coeffs.amax().max(1.0) {
            return Err(FdtError::NotHermitian { deviation: asym, tolerance: SYMMETRY_TOL });
        }
        Ok(Self { coeffs: (coeffs + coeffs.transpose()) * 0.5, offset })
    }

    /// `½(R_jR_k + R_kR_j)`.
    pub fn product(j: usize, k: usize) -> Self {
        let mut q = Matrix4::zeros();
        q[(j, k)] += 0.5;
        q[(k, j)] += 0.5;
        Self { coeffs: q, offset: 0.0 }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs * s, offset: self.offset * s }
    }

    pub fn is_local(&self) -> bool {
        [(0, 1), (0, 3), (2, 1), (2, 3)].iter().all(|&(i, j)| self.coeffs[(i, j)] == 0.0)
    }

    /// `Tr(Qσ) + mᵀQm + offset`.
    pub fn expectation(&self, state: &GaussianState) -> f64 {
        (self.coeffs * state.cov()).trace() + state.mean().dot(&(self.coeffs * state.mean())) + self.offset
    }

    /// Heisenberg image under a Gaussian channel with moment propagator
    /// `m` and stationary covariance `sigma_inf`.
    pub fn heisenberg(&self, m: &Matrix4<f64>, sigma_inf: &Matrix4<f64>) -> Self {
        let q = m.transpose() * self.coeffs * m;
        let shift = (self.coeffs * (sigma_inf - m * sigma_inf * m.transpose())).trace();
        Self { coeffs: (q + q.transpose()) * 0.5, offset: self.offset + shift }
    }
}

/// Named quadratic observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quadratic {
    X1X2,
    X1P2,
    P1X2,
    P1P2,
    X1Sq,
    X2Sq,
    P1Sq,
    P2Sq,
    /// `½(x₁p₁ + p₁x₁)`
    X1P1,
    /// `½(x₂p₂ + p₂x₂)`
    X2P2,
}

impl Quadratic {
    pub const ALL: [Quadratic; 10] = [
        Quadratic::X1X2,
        Quadratic::X1P2,
        Quadratic::P1X2,
        Quadratic::P1P2,
        Quadratic::X1Sq,
        Quadratic::X2Sq,
        Quadratic::P1Sq,
        Quadratic::P2Sq,
        Quadratic::X1P1,
        Quadratic::X2P2,
    ];

    pub const NONLOCAL: [Quadratic; 4] = [Quadratic::X1X2, Quadratic::X1P2, Quadratic::P1X2, Quadratic::P1P2];

    fn indices(self) -> (usize, usize) {
        match self {
            Quadratic::X1X2 => (0, 1),
            Quadratic::X1P2 => (0, 3),
            Quadratic::P1X2 => (2, 1),
            Quadratic::P1P2 => (2, 3),
            Quadratic::X1Sq => (0, 0),
            Quadratic::X2Sq => (1, 1),
            Quadratic::P1Sq => (2, 2),
            Quadratic::P2Sq => (3, 3),
            Quadratic::X1P1 => (0, 2),
            Quadratic::X2P2 => (1, 3),
        }
    }

    pub fn observable(self) -> QuadraticObservable {
        let (j, k) = self.indices();
        QuadraticObservable::product(j, k)
    }

    pub fn is_local(self) -> bool {
        !Self::NONLOCAL.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadratic::X1X2 => "x1x2",
            Quadratic::X1P2 => "x1p2",
            Quadratic::P1X2 => "p1x2",
            Quadratic::P1P2 => "p1p2",
            Quadratic::X1Sq => "x1^2",
            Quadratic::X2Sq => "x2^2",
            Quadratic::P1Sq => "p1^2",
            Quadratic::P2Sq => "p2^2",
            Quadratic::X1P1 => "x1p1",
            Quadratic::X2P2 => "x2p2",
        }
    }
}

impl fmt::Display for Quadratic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quadratic {
    type Err = FdtError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|q| q.name() == s).ok_or_else(|| FdtError::UnsupportedObservable(s.to_string()))
    }
}

/// Heisenberg evolution at J = 0 in closed form: each mode rotates at its
/// own frequency and decays at γ/2, with the local constants relaxing to
/// their thermal values.
pub fn quadrature_evolution(q: &QuadraticObservable, t: f64, p: &OscillatorParams) -> Result<QuadraticObservable> {
    p.require_uncoupled()?;
    let decay = (-0.5 * p.gamma * t).exp();
    let mut m = Matrix4::zeros();
    for (j, w) in [p.omega1(), p.omega2()].into_iter().enumerate() {
        let (s, c) = (w * t).sin_cos();
        m[(j, j)] = c;
        m[(j, j + 2)] = s;
        m[(j + 2, j)] = -s;
        m[(j + 2, j + 2)] = c;
    }
    m *= decay;
    Ok(q.heisenberg(&m, GaussianState::reference(p)?.cov()))
}

/// Heisenberg evolution for any J from `e^{At}` and the Lyapunov steady state.
pub fn quadrature_evolution_numeric(q: &QuadraticObservable, t: f64, p: &OscillatorParams) -> Result<QuadraticObservable> {
    let sigma = steady_state_lyapunov(p)?;
    Ok(q.heisenberg(&propagator(p, t), sigma.cov()))
}

/// `½⟨{O₁, O₂}⟩ − ⟨O₁⟩⟨O₂⟩ = 2Tr(Q₁σQ₂σ) + ½Tr(Q₁ΩQ₂Ω)` for a zero-mean state.
pub fn wick_correlation(state: &GaussianState, q1: &QuadraticObservable, q2: &QuadraticObservable) -> Result<f64> {
    let m = state.mean().amax();
    if m > SYMMETRY_TOL {
        return Err(FdtError::NonzeroMean(m));
    }
    let s = state.cov();
    let w = symplectic_form();
    Ok(2.0 * (q1.coeffs * s * q2.coeffs * s).trace() + 0.5 * (q1.coeffs * w * q2.coeffs * w).trace())
}

/// Solves `2σLσ + ½ΩLΩ = ∂σ` for the symmetric SLD kernel L, working in
/// the 10-dimensional space of symmetric matrices.
pub fn solve_sld_equation(sigma: &Matrix4<f64>, d_sigma: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let w = symplectic_form();
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
    let basis = |(a, b): (usize, usize)| {
        let mut e = Matrix4::zeros();
        e[(a, b)] = 1.0;
        e[(b, a)] = 1.0;
        e
    };
    let mut k = SMatrix::<f64, 10, 10>::zeros();
    for (col, &pair) in pairs.iter().enumerate() {
        let e = basis(pair);
        let image = sigma * e * sigma * 2.0 + w * e * w * 0.5;
        for (row, &(i, j)) in pairs.iter().enumerate() {
            k[(row, col)] = image[(i, j)];
        }
    }
    let rhs = SVector::<f64, 10>::from_iterator(pairs.iter().map(|&(i, j)| d_sigma[(i, j)]));
    let x = k.lu().solve(&rhs).ok_or(FdtError::Singular("Gaussian SLD equation"))?;
    Ok(pairs.iter().zip(x.iter()).fold(Matrix4::zeros(), |acc, (&pair, &v)| {
        let scale = if pair.0 == pair.1 { 0.5 } else { 1.0 };
        acc + basis(pair) * (v * scale)
    }))
}

/// Gaussian SLD `Λ₀ = Σ_i d_i(local_i − ⟨local_i⟩) + c₁x₁x₂ + c₂x₁p₂ + c₃p₁x₂ + c₄p₁p₂`.
///
/// Local terms are `x₁², p₁², x₁p₁+p₁x₁, x₂², p₂², x₂p₂+p₂x₂` in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSld {
    pub c: [f64; 4],
    pub d: [f64; 6],
    observable: QuadraticObservable,
}

impl GaussianSld {
    fn from_kernel(l: Matrix4<f64>, sigma: &Matrix4<f64>) -> Self {
        let c = [2.0 * l[(0, 1)], 2.0 * l[(0, 3)], 2.0 * l[(2, 1)], 2.0 * l[(2, 3)]];
        let d = [l[(0, 0)], l[(2, 2)], l[(0, 2)], l[(1, 1)], l[(3, 3)], l[(1, 3)]];
        let offset = -(l * sigma).trace();
        Self { c, d, observable: QuadraticObservable { coeffs: l, offset } }
    }

    /// Λ₀ as a quadratic observable with zero mean under π₀.
    pub fn observable(&self) -> &QuadraticObservable {
        &self.observable
    }

    /// Largest violation of `c₁ = c₄`, `c₂ = −c₃`, `d_i = 0`.
    pub fn structure_defect(&self) -> f64 {
        let mut worst = (self.c[0] - self.c[3]).abs().max((self.c[1] + self.c[2]).abs());
        for d in self.d {
            worst = worst.max(d.abs());
        }
        worst
    }
}

/// SLD at J = 0 from the closed-form derivative of σ^∞:
/// `c₁ = c₄ = ∂σ₁₂/(σ₁₁σ₂₂ − ¼)`, `c₂ = −c₃ = ∂σ₁₄/(σ₁₁σ₄₄ − ¼)`, `d_i = 0`.
/// The defining linear system is checked on the result.
pub fn gaussian_sld(p: &OscillatorParams) -> Result<GaussianSld> {
    let d_sigma = steady_state_derivative(p)?;
    let sigma = GaussianState::reference(p)?;
    let s = sigma.cov();
    let denom = s[(0, 0)] * s[(1, 1)] - 0.25;
    let (c1, c2) = if denom > 0.0 { (d_sigma[(0, 1)] / denom, d_sigma[(0, 3)] / denom) } else { (0.0, 0.0) };
    #[rustfmt::skip]
    let l = Matrix4::new(
        0.0, c1,  0.0, c2,
        c1,  0.0, -c2, 0.0,
        0.0, -c2, 0.0, c1,
        c2,  0.0, c1,  0.0,
    ) * 0.5;
    let w = symplectic_form();
    let residual = (s * l * s * 2.0 + w * l * w * 0.5 - d_sigma).amax();
    let tolerance = 1e-12 * d_sigma.amax().max(1e-300);
    if residual > tolerance && residual > 1e-14 {
        return Err(FdtError::RouteDisagreement { quantity: "Gaussian SLD equation", difference: residual, tolerance });
    }
    Ok(GaussianSld::from_kernel(l, s))
}

/// SLD from a central difference of the closed-form σ^∞ in J and the
/// general linear solve.
pub fn gaussian_sld_fd(p: &OscillatorParams, h: f64) -> Result<GaussianSld> {
    p.require_uncoupled()?;
    let plus = steady_state_cm(&p.with_coupling(h))?;
    let minus = steady_state_cm(&p.with_coupling(-h))?;
    let d_sigma = (plus.cov() - minus.cov()) / (2.0 * h);
    let sigma = GaussianState::reference(p)?;
    Ok(GaussianSld::from_kernel(solve_sld_equation(sigma.cov(), &d_sigma)?, sigma.cov()))
}

fn decay_amplitudes(p: &OscillatorParams) -> (f64, f64, f64) {
    let k = p.n1() - p.n2();
    let g2d2 = p.gamma * p.gamma + p.delta * p.delta;
    (k, p.delta * k / g2d2, p.gamma * k / g2d2)
}

/// `Corr(Λ₀, B(t))₀` in closed form; zero for local observables.
///
/// With `K = N₁ − N₂`, `a = δK/(γ²+δ²)`, `b = γK/(γ²+δ²)`:
/// x₁x₂ and p₁p₂ give `e^{−γt}(a cos δt + b sin δt)`, x₁p₂ gives
/// `e^{−γt}(b cos δt − a sin δt)` and p₁x₂ its negative.
pub fn correlation_analytic(obs: Quadratic, t: f64, p: &OscillatorParams) -> Result<f64> {
    p.require_uncoupled()?;
    let (_, a, b) = decay_amplitudes(p);
    let e = (-p.gamma * t).exp();
    let (s, c) = (p.delta * t).sin_cos();
    Ok(match obs {
        Quadratic::X1X2 | Quadratic::P1P2 => e * (a * c + b * s),
        Quadratic::X1P2 => e * (b * c - a * s),
        Quadratic::P1X2 => e * (a * s - b * c),
        _ => 0.0,
    })
}

/// `φ_B(t) = −d/dt Corr(Λ₀, B(t))₀` in closed form; zero for local observables.
///
/// x₁x₂ and p₁p₂ give `K e^{−γt} sin δt`, x₁p₂ gives `K e^{−γt} cos δt`
/// and p₁x₂ its negative.
pub fn response_analytic(obs: Quadratic, t: f64, p: &OscillatorParams) -> Result<f64> {
    p.require_uncoupled()?;
    let (k, _, _) = decay_amplitudes(p);
    let e = (-p.gamma * t).exp();
    let (s, c) = (p.delta * t).sin_cos();
    Ok(match obs {
        Quadratic::X1X2 | Quadratic::P1P2 => k * e * s,
        Quadratic::X1P2 => k * e * c,
        Quadratic::P1X2 => -k * e * c,
        _ => 0.0,
    })
}

/// `χ_B(ν) = ∫₀^∞ φ_B(t) e^{iνt} dt` of [`response_analytic`].
///
/// With `s = γ − iν`, the sine part transforms to `δ/(s²+δ²)` and the
/// cosine part to `s/(s²+δ²)`.
pub fn susceptibility_analytic(obs: Quadratic, nu: f64, p: &OscillatorParams) -> Result<Complex64> {
    p.require_uncoupled()?;
    let (k, _, _) = decay_amplitudes(p);
    let s = Complex64::new(p.gamma, -nu);
    let den = s * s + p.delta * p.delta;
    Ok(match obs {
        Quadratic::X1X2 | Quadratic::P1P2 => k * p.delta / den,
        Quadratic::X1P2 => k * s / den,
        Quadratic::P1X2 => -k * s / den,
        _ => Complex64::new(0.0, 0.0),
    })
}

/// `(N₂−N₁)/√(γ²+δ²)·e^{−γt}cos(δt − θ)` with `θ = arctan(γ/δ)`.
///
/// Algebraically equal to `−Corr(Λ₀, x₁x₂(t))₀`, which is not the response
/// function of the model: the response is its time derivative.
pub fn x1x2_phase_form(t: f64, p: &OscillatorParams) -> Result<f64> {
    p.require_uncoupled()?;
    let theta = (p.gamma / p.delta).atan();
    let r = (p.gamma * p.gamma + p.delta * p.delta).sqrt();
    Ok((p.n2() - p.n1()) / r * (-p.gamma * t).exp() * (p.delta * t - theta).cos())
}

/// Wick evaluation of `Corr(Λ₀, B(t))₀` with B(t) from `e^{At}`.
pub fn gaussian_sld_correlation(p: &OscillatorParams, obs: &QuadraticObservable, grid: TimeGrid) -> Result<ResponseSeries> {
    let sld = gaussian_sld(p)?;
    let pi0 = GaussianState::reference(p)?;
    let values = (0..grid.len())
        .map(|k| {
            let bt = obs.heisenberg(&propagator(p, grid.time(k)), pi0.cov());
            wick_correlation(&pi0, sld.observable(), &bt)
        })
        .collect::<Result<Vec<_>>>()?;
    ResponseSeries::new(0.0, grid.dt, values)
}

/// Response from the SLD relation on the Gaussian model, with the time
/// derivative taken exactly: `d/dt Q(t) = AᵀQ(t) + Q(t)A`.
pub fn gaussian_response_fdt(p: &OscillatorParams, obs: &QuadraticObservable, grid: TimeGrid) -> Result<ResponseSeries> {
    let sld = gaussian_sld(p)?;
    let pi0 = GaussianState::reference(p)?;
    let a = drift_matrix(p);
    let values = (0..grid.len())
        .map(|k| {
            let m = propagator(p, grid.time(k));
            let q = m.transpose() * obs.coeffs * m;
            let rate = QuadraticObservable { coeffs: a.transpose() * q + q * a, offset: 0.0 };
            wick_correlation(&pi0, sld.observable(), &rate).map(|c| -c)
        })
        .collect::<Result<Vec<_>>>()?;
    ResponseSeries::new(0.0, grid.dt, values)
}

/// Static susceptibility `Corr(Λ₀, B)₀`.
pub fn gaussian_static_susceptibility(p: &OscillatorParams, obs: &QuadraticObservable) -> Result<f64> {
    let sld = gaussian_sld(p)?;
    wick_correlation(&GaussianState::reference(p)?, sld.observable(), obs)
}

/// `Var(B)₀` under π₀.
pub fn gaussian_variance(p: &OscillatorParams, obs: &QuadraticObservable) -> Result<f64> {
    wick_correlation(&GaussianState::reference(p)?, obs, obs)
}

/// Quantum Fisher information of the steady state with respect to J at
/// J = 0, `Var(Λ₀)₀`.
pub fn ness_qfi(p: &OscillatorParams) -> Result<f64> {
    let sld = gaussian_sld(p)?;
    wick_correlation(&GaussianState::reference(p)?, sld.observable(), sld.observable())
}

/// Equal-temperature example: detuning factor, QFI formula and its dense check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumExample {
    pub beta: f64,
    pub detuning_factor: f64,
    /// Var(A) on the truncated thermal state.
    pub var_a: f64,
    /// `2n₁n₂ + n₁ + n₂` with untruncated Bose occupations.
    pub var_a_exact: f64,
    /// `C²β²Var(A)`.
    pub qfi_formula: f64,
    /// Thermal QFI from the dense SLD on the truncated space.
    pub qfi_dense: f64,
    /// The SLD equals `sld_scale·(A − ⟨A⟩)`.
    pub sld_scale: f64,
}

impl EquilibriumExample {
    pub fn relative_deviation(&self) -> f64 {
        (self.qfi_formula - self.qfi_dense).abs() / self.qfi_dense.abs().max(f64::MIN_POSITIVE)
    }
}

/// Thermal state of H₀ at the common temperature, perturbed by J·A.
pub fn equilibrium_example(p: &OscillatorParams, n_max: usize) -> Result<EquilibriumExample> {
    p.validate()?;
    if (p.t1 - p.t2).abs() > 1e-12 * p.t1.max(p.t2) {
        return Err(FdtError::UnequalTemperatures { t1: p.t1, t2: p.t2 });
    }
    let t = p.t1;
    let beta = 1.0 / t;
    let c = crate::sld_metrology::detuning_factor(p.delta, t)?;
    let ops = fock::FockOperators::new(n_max)?;
    let h0 = HermitianOperator::new(&ops.n1 * Complex64::new(p.omega1(), 0.0) + &ops.n2 * Complex64::new(p.omega2(), 0.0))?;
    let a = HermitianOperator::new(ops.hopping.clone())?;
    let (pi, _) = crate::operator_core::thermal_state(&h0, beta)?;
    let mean = crate::operator_core::expectation(&pi, &a)?;
    let var_a = crate::operator_core::symmetrized_correlation(&pi, &a, &a)?;
    let (n1, n2) = (bose(p.omega1(), t), bose(p.omega2(), t));
    let qfi_dense = crate::sld_metrology::thermal_qfi(&h0, &a, beta)?;
    debug_assert!(mean.abs() < 1e-12);
    Ok(EquilibriumExample {
        beta,
        detuning_factor: c,
        var_a,
        var_a_exact: 2.0 * n1 * n2 + n1 + n2,
        qfi_formula: c * c * beta * beta * var_a,
        qfi_dense,
        sld_scale: c * beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_params() -> OscillatorParams {
        OscillatorParams::default()
    }

    #[test]
    fn bose_examples() {
        assert!((bose(1.0, 1.0) - 0.5819767068693265).abs() < 1e-15);
        let p = default_params();
        assert!(p.n2() > p.n1());
    }

    #[test]
    fn parameter_validation() {
        assert!(default_params().validate().is_ok());
        assert!(OscillatorParams { gamma: 0.0, ..default_params() }.validate().is_err());
        assert!(OscillatorParams { t2: -1.0, ..default_params() }.validate().is_err());
        assert!(default_params().with_coupling(2.0).validate().is_err());
        assert!(gaussian_sld(&default_params().with_coupling(0.01)).is_err());
    }

    #[test]
    fn uncoupled_steady_state_is_diagonal() {
        let p = default_params();
        let s = steady_state_cm(&p).unwrap();
        let expected = Matrix4::from_diagonal(&Vector4::new(p.n1() + 0.5, p.n2() + 0.5, p.n1() + 0.5, p.n2() + 0.5));
        assert_eq!(*s.cov(), expected);
    }

    #[test]
    fn equal_baths_give_no_correlations() {
        let p = OscillatorParams { t2: default_params().omega2(), coupling: 0.02, ..default_params() };
        assert!((p.n1() - p.n2()).abs() < 1e-15);
        let s = steady_state_cm(&p).unwrap();
        for (i, j) in [(0, 1), (0, 3), (1, 2), (2, 3)] {
            assert!(s.cov()[(i, j)].abs() < 1e-15);
        }
        let sld = gaussian_sld(&p.with_coupling(0.0)).unwrap();
        assert!(sld.c.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn closed_form_matches_lyapunov() {
        let p = default_params().with_coupling(0.01);
        let a = steady_state_cm(&p).unwrap();
        let b = steady_state_lyapunov(&p).unwrap();
        assert!((a.cov() - b.cov()).amax() < 1e-10);
    }

    #[test]
    fn uncertainty_is_enforced() {
        assert!(matches!(GaussianState::zero_mean(Matrix4::identity() * 0.4), Err(FdtError::Uncertainty(_))));
        assert!(GaussianState::zero_mean(Matrix4::identity() * 0.5).is_ok());
        let mut asym = Matrix4::identity();
        asym[(0, 1)] = 1e-6;
        assert!(GaussianState::zero_mean(asym).is_err());
    }

    #[test]
    fn sld_routes_agree_and_have_the_expected_structure() {
        let p = default_params();
        let analytic = gaussian_sld(&p).unwrap();
        let fd = gaussian_sld_fd(&p, 1e-6).unwrap();
        for k in 0..4 {
            assert!((analytic.c[k] - fd.c[k]).abs() < 1e-6);
        }
        assert_eq!(analytic.structure_defect(), 0.0);
        assert!(fd.structure_defect() < 1e-6);
        let pi0 = GaussianState::reference(&p).unwrap();
        assert!(analytic.observable().expectation(&pi0).abs() < 1e-15);
        let s = (p.n1() + 0.5) * (p.n2() + 0.5);
        let k = p.n1() - p.n2();
        let g2d2 = p.gamma * p.gamma + p.delta * p.delta;
        assert!((analytic.c[0] - p.delta * k / (g2d2 * (s - 0.25))).abs() < 1e-12 * analytic.c[0].abs());
    }

    #[test]
    fn static_relation_holds_for_every_quadratic() {
        let p = default_params();
        let sld = gaussian_sld(&p).unwrap();
        let pi0 = GaussianState::reference(&p).unwrap();
        let h = 1e-5;
        for q in Quadratic::ALL {
            let obs = q.observable();
            let plus = obs.expectation(&steady_state_cm(&p.with_coupling(h)).unwrap());
            let minus = obs.expectation(&steady_state_cm(&p.with_coupling(-h)).unwrap());
            let fd = (plus - minus) / (2.0 * h);
            let corr = wick_correlation(&pi0, sld.observable(), &obs).unwrap();
            assert!((fd - corr).abs() < 1e-6, "{q}: {fd} vs {corr}");
        }
    }

    #[test]
    fn wick_examples() {
        let p = default_params();
        let pi0 = GaussianState::reference(&p).unwrap();
        let x1 = Quadratic::X1Sq.observable();
        let v = wick_correlation(&pi0, &x1, &x1).unwrap();
        assert!((v - 2.0 * (p.n1() + 0.5).powi(2)).abs() < 1e-14);
        let sld = gaussian_sld(&p).unwrap();
        for q in Quadratic::ALL.iter().filter(|q| q.is_local()) {
            assert_eq!(wick_correlation(&pi0, &q.observable(), sld.observable()).unwrap(), 0.0);
        }
        let shifted = GaussianState::new(Vector4::new(0.1, 0.0, 0.0, 0.0), *pi0.cov()).unwrap();
        assert!(matches!(wick_correlation(&shifted, &x1, &x1), Err(FdtError::NonzeroMean(_))));
    }

    #[test]
    fn evolution_closed_form_matches_exponential() {
        let p = default_params();
        for q in Quadratic::ALL {
            let obs = q.observable();
            assert_eq!(quadrature_evolution(&obs, 0.0, &p).unwrap(), obs);
            for t in [0.7, 13.0, 150.0] {
                let a = quadrature_evolution(&obs, t, &p).unwrap();
                let b = quadrature_evolution_numeric(&obs, t, &p).unwrap();
                assert!((a.coeffs - b.coeffs).amax() < 1e-12, "{q} at {t}");
                assert!((a.offset - b.offset).abs() < 1e-12);
            }
        }
        let late = quadrature_evolution(&Quadratic::X1Sq.observable(), 1e4, &p).unwrap();
        assert!(late.coeffs.amax() < 1e-20);
        assert!((late.offset - (p.n1() + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn analytic_response_and_correlation_are_consistent() {
        let p = default_params();
        let grid = TimeGrid::new(0.5, 400).unwrap();
        for q in Quadratic::ALL {
            let obs = q.observable();
            let corr = gaussian_sld_correlation(&p, &obs, grid).unwrap();
            let phi = gaussian_response_fdt(&p, &obs, grid).unwrap();
            for k in 0..grid.len() {
                let t = grid.time(k);
                assert!((corr.values()[k] - correlation_analytic(q, t, &p).unwrap()).abs() < 1e-10, "{q}");
                let exact = response_analytic(q, t, &p).unwrap();
                assert!((phi.values()[k] - exact).abs() < 1e-10, "{q}");
                if q.is_local() {
                    assert_eq!(exact, 0.0);
                    assert!(phi.values()[k].abs() <= 1e-10);
                }
            }
        }
        let s = p.gamma * p.gamma + p.delta * p.delta;
        assert!(
            (gaussian_static_susceptibility(&p, &Quadratic::X1X2.observable()).unwrap() - p.delta * (p.n1() - p.n2()) / s).abs()
                < 1e-12
        );
    }

    #[test]
    fn phase_form_is_minus_the_correlation() {
        let p = default_params();
        assert!(((p.gamma / p.delta).atan() - 0.09966865249116204).abs() < 1e-15);
        for t in [0.0, 3.0, 40.0, 199.0] {
            let a = x1x2_phase_form(t, &p).unwrap();
            let b = correlation_analytic(Quadratic::X1X2, t, &p).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_spectrum_matches_quadrature() {
        let p = default_params();
        let grid = TimeGrid::covering(2500.0, 0.05).unwrap();
        let nus = [0.0, 0.05, 0.1, 0.2];
        for q in Quadratic::NONLOCAL {
            let phi = ResponseSeries::new(
                0.0,
                grid.dt,
                (0..grid.len()).map(|k| response_analytic(q, grid.time(k), &p).unwrap()).collect(),
            )
            .unwrap();
            let numeric = crate::response::generalized_susceptibility(&phi, &nus, 0.0).unwrap();
            for (nu, z) in nus.iter().zip(&numeric.values) {
                let exact = susceptibility_analytic(q, *nu, &p).unwrap();
                assert!((exact - z).norm() < 1e-4 * exact.norm().max(1.0), "{q} at {nu}: {exact} vs {z}");
            }
        }
        let chi0 = susceptibility_analytic(Quadratic::X1X2, 0.0, &p).unwrap();
        let chis = gaussian_static_susceptibility(&p, &Quadratic::X1X2.observable()).unwrap();
        assert!((chi0.re - chis).abs() < 1e-12 * chis.abs() && chi0.im == 0.0);
    }

    #[test]
    fn equal_occupations_give_zero_response() {
        let p = OscillatorParams { t2: 1.1, ..default_params() };
        for q in Quadratic::ALL {
            assert!(response_analytic(q, 5.0, &p).unwrap().abs() < 1e-15);
        }
        assert!(ness_qfi(&p).unwrap().abs() < 1e-20);
    }

    #[test]
    fn qfi_bounds_static_sensitivity() {
        let p = default_params();
        let f0 = ness_qfi(&p).unwrap();
        assert!(f0 > 0.0);
        let sld = gaussian_sld(&p).unwrap();
        let s = (p.n1() + 0.5) * (p.n2() + 0.5);
        assert!((f0 - 2.0 * (sld.c[0].powi(2) + sld.c[1].powi(2)) * (s - 0.25)).abs() < 1e-10 * f0);
        for q in Quadratic::NONLOCAL {
            let obs = q.observable();
            let chi = gaussian_static_susceptibility(&p, &obs).unwrap();
            let var = gaussian_variance(&p, &obs).unwrap();
            assert!(chi * chi / var <= f0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn swapping_the_oscillators_preserves_the_qfi() {
        let p = default_params();
        let a = ness_qfi(&p).unwrap();
        let b = ness_qfi(&p.swapped()).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn equilibrium_requires_equal_temperatures() {
        assert!(matches!(equilibrium_example(&default_params(), 4), Err(FdtError::UnequalTemperatures { .. })));
    }

    #[test]
    fn equilibrium_zero_detuning_and_factor() {
        let p = OscillatorParams { delta: 0.0, t2: 1.0, ..default_params() };
        let e = equilibrium_example(&p, 8).unwrap();
        assert_eq!(e.detuning_factor, 1.0);
        assert!((e.qfi_formula - e.beta * e.beta * e.var_a).abs() < 1e-15);
        let p = OscillatorParams { delta: 2.0, t2: 1.0, ..default_params() };
        let e = equilibrium_example(&p, 8).unwrap();
        assert!((e.detuning_factor.powi(2) - 1f64.tanh().powi(2)).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_form_equals_lyapunov(
            j in -0.05f64..0.05,
            delta in -0.5f64..0.5,
            gamma in 0.001f64..0.5,
            t1 in 0.2f64..5.0,
            t2 in 0.2f64..5.0,
        ) {
            let p = OscillatorParams { omega: 1.0, delta, coupling: j, gamma, t1, t2 };
            let a = steady_state_cm(&p).unwrap();
            let b = steady_state_lyapunov(&p).unwrap();
            prop_assert!((a.cov() - b.cov()).amax() <= 1e-10 * b.cov().amax());
        }

        #[test]
        fn sld_solver_inverts_the_wick_map(
            delta in 0.01f64..0.5,
            gamma in 0.001f64..0.5,
            t1 in 0.2f64..5.0,
            t2 in 0.2f64..5.0,
        ) {
            let p = OscillatorParams { omega: 1.0, delta, coupling: 0.0, gamma, t1, t2 };
            let analytic = gaussian_sld(&p).unwrap();
            let sigma = GaussianState::reference(&p).unwrap();
            let general = solve_sld_equation(sigma.cov(), &steady_state_derivative(&p).unwrap()).unwrap();
            let scale = analytic.observable().coeffs.amax().max(1e-300);
            prop_assert!((general - analytic.observable().coeffs).amax() <= 1e-10 * scale);
        }
    }
}
