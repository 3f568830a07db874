//! Parameterized CPTP maps in Kraus and Lindblad form: application,
//! Heisenberg (adjoint) action, fixed points, integration, and the
//! first-order derivatives ξ₁ and π₁ of a family ξ_λ.
//!
//! Operators are vectorized by stacking columns, so that
//! `vec(AXB) = (Bᵀ ⊗ A) vec(X)`; this is nalgebra's native storage order.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, SVD};
use num_complex::Complex64;

use crate::error::{FdtError, Result};
use crate::operator_core::{
    check_dims, eig_hermitian, hermitian_part, max_abs, CMatrix, DensityMatrix, HermitianOperator, I, TRACE_TOL,
};
use crate::sparse::Op;

/// Tolerance on `Σ K†K = I`.
pub const CPTP_TOL: f64 = 1e-10;
/// Residual required of a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Largest `dt·‖𝓛‖` accepted by the fourth-order integrator. The RK4
/// stability region contains the left half-disk of this radius.
pub const RK4_STABILITY: f64 = 2.5;
/// `dt·‖𝓛‖` used for the substeps of an integrated propagator, chosen for
/// accuracy rather than stability.
pub const PROPAGATOR_STEP_SCALE: f64 = 0.05;
/// Dimension up to which fixed points use a dense null-space solve.
pub const DENSE_FIXED_POINT_DIM: usize = 12;
/// Dimension up to which `to_channel` exponentiates the superoperator.
pub const EXACT_PROPAGATOR_DIM: usize = 20;
/// Default finite-difference step for ξ₁ and π₁.
pub const DEFAULT_STEP: f64 = 1e-4;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub(crate) fn vectorize(x: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(x.as_slice())
}

pub(crate) fn unvectorize(v: &DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// A linear map on operators with a Heisenberg-picture adjoint.
pub trait Channel: Send + Sync {
    fn dim(&self) -> usize;
    /// Schrödinger-picture action on an arbitrary operator.
    fn map_matrix(&self, x: &CMatrix) -> CMatrix;
    /// Hilbert–Schmidt adjoint, so `Tr[A ξ(X)] = Tr[ξ̃(A) X]`.
    fn adjoint_map_matrix(&self, x: &CMatrix) -> CMatrix;
    fn is_trace_preserving(&self) -> bool {
        true
    }
    /// Matrix acting on column-stacked operators.
    fn superoperator(&self) -> Superoperator {
        let d = self.dim();
        let mut m = CMatrix::zeros(d * d, d * d);
        let mut unit = CMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                unit[(i, j)] = ONE;
                let image = self.map_matrix(&unit);
                m.set_column(i + j * d, &vectorize(&image));
                unit[(i, j)] = ZERO;
            }
        }
        Superoperator { matrix: m, dim: d, trace_preserving: self.is_trace_preserving() }
    }
}

/// Channel in operator-sum form `ρ ↦ Σ K ρ K†`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    dim: usize,
}

impl KrausChannel {
    /// Checks equal square shapes and `Σ K†K = I` within 1e-10.
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops.first().ok_or(FdtError::invalid("kraus_ops", "empty list"))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(FdtError::EmptyOperator);
        }
        for k in &ops {
            if k.nrows() != k.ncols() {
                return Err(FdtError::NotSquare { rows: k.nrows(), cols: k.ncols() });
            }
            check_dims(dim, k.nrows())?;
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &ops {
            sum.gemm(ONE, &k.adjoint(), k, ONE);
        }
        let deviation = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if !deviation.is_finite() || deviation > CPTP_TOL {
            return Err(FdtError::NotTracePreserving { deviation });
        }
        Ok(Self { ops, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self { ops: vec![CMatrix::identity(dim, dim)], dim }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// `ρ ↦ (1−p)ρ + p·Tr[ρ]·I/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(FdtError::invalid("p", format!("must lie in [0, 1], got {p}")));
        }
        let mut ops = vec![CMatrix::identity(dim, dim) * real((1.0 - p).sqrt())];
        let w = (p / dim as f64).sqrt();
        for i in 0..dim {
            for j in 0..dim {
                let mut k = CMatrix::zeros(dim, dim);
                k[(i, j)] = real(w);
                ops.push(k);
            }
        }
        Self::new(ops)
    }

    /// Qubit amplitude damping with decay probability `g`.
    pub fn amplitude_damping(g: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&g) {
            return Err(FdtError::invalid("g", format!("must lie in [0, 1], got {g}")));
        }
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, real((1.0 - g).sqrt())]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, real(g.sqrt()), ZERO, ZERO]);
        Self::new(vec![k0, k1])
    }

    pub fn kraus_ops(&self) -> &[CMatrix] {
        &self.ops
    }
}

impl Channel for KrausChannel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn map_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            out += k * x * k.adjoint();
        }
        out
    }

    fn adjoint_map_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.ops {
            out += k.adjoint() * x * k;
        }
        out
    }

    fn superoperator(&self) -> Superoperator {
        let d = self.dim;
        let mut m = CMatrix::zeros(d * d, d * d);
        for k in &self.ops {
            m += k.map(|z| z.conj()).kronecker(k);
        }
        Superoperator { matrix: m, dim: d, trace_preserving: true }
    }
}

/// Matrix representation of a linear map on column-stacked operators.
#[derive(Clone, Debug)]
pub struct Superoperator {
    matrix: CMatrix,
    dim: usize,
    trace_preserving: bool,
}

impl Superoperator {
    pub fn new(matrix: CMatrix, trace_preserving: bool) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(FdtError::NotSquare { rows: n, cols: matrix.ncols() });
        }
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n || dim == 0 {
            return Err(FdtError::invalid("matrix", format!("size {n} is not a square dimension")));
        }
        Ok(Self { matrix, dim, trace_preserving })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvectorize(&(&self.matrix * vectorize(x)), self.dim)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        check_dims(self.dim, other.dim)?;
        Ok(Superoperator {
            matrix: &self.matrix * &other.matrix,
            dim: self.dim,
            trace_preserving: self.trace_preserving && other.trace_preserving,
        })
    }

    /// Eigenvalues sorted by decreasing modulus.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let ev = self.matrix.clone().eigenvalues().ok_or(FdtError::EigenFailure)?;
        let mut v: Vec<Complex64> = ev.iter().cloned().collect();
        v.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        Ok(v)
    }

    pub fn leading_eigenvalue_magnitude(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0].norm())
    }

    /// `1 − |μ₂|` with `μ₂` the subleading eigenvalue.
    pub fn spectral_gap(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(1.0 - ev.get(1).map_or(0.0, |z| z.norm()))
    }

    /// Largest change of a trace under the map, per unit operator norm.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let t: Complex64 = (0..d).map(|k| self.matrix[(k * (d + 1), col)]).sum();
            let input = if col % (d + 1) == 0 { ONE } else { ZERO };
            worst = worst.max((t - input).norm());
        }
        worst
    }
}

impl Channel for Superoperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn map_matrix(&self, x: &CMatrix) -> CMatrix {
        self.apply(x)
    }

    fn adjoint_map_matrix(&self, x: &CMatrix) -> CMatrix {
        unvectorize(&self.matrix.ad_mul(&vectorize(x)), self.dim)
    }

    fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    fn superoperator(&self) -> Superoperator {
        self.clone()
    }
}

/// Jump operator with its rate.
#[derive(Clone, Debug)]
pub struct Dissipator {
    pub jump: CMatrix,
    pub rate: f64,
}

impl Dissipator {
    pub fn new(jump: CMatrix, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(FdtError::invalid("rate", format!("must be nonnegative and finite, got {rate}")));
        }
        if jump.nrows() != jump.ncols() {
            return Err(FdtError::NotSquare { rows: jump.nrows(), cols: jump.ncols() });
        }
        Ok(Self { jump, rate })
    }
}

/// `𝓛(ρ) = −i[H, ρ] + Σ γ (LρL† − ½{L†L, ρ})`.
///
/// Internally `𝓛(ρ) = Gρ + ρG† + Σ γ LρL†` with `G = −iH − ½Σ γ L†L`.
#[derive(Clone)]
pub struct LindbladGenerator {
    hamiltonian: HermitianOperator,
    dissipators: Vec<Dissipator>,
    g: Op,
    g_adj: Op,
    jumps: Vec<(f64, Op, Op)>,
    bound: f64,
}

impl fmt::Debug for LindbladGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LindbladGenerator")
            .field("dim", &self.dim())
            .field("dissipators", &self.dissipators.len())
            .field("norm_bound", &self.bound)
            .finish()
    }
}

impl LindbladGenerator {
    pub fn new(hamiltonian: HermitianOperator, dissipators: Vec<Dissipator>) -> Result<Self> {
        let d = hamiltonian.dim();
        let mut g = hamiltonian.matrix() * (-I);
        let mut jumps = Vec::with_capacity(dissipators.len());
        let mut bound = 0.0;
        for diss in &dissipators {
            check_dims(d, diss.jump.nrows())?;
            g.gemm(real(-0.5 * diss.rate), &diss.jump.adjoint(), &diss.jump, ONE);
            let l = Op::new(&diss.jump);
            let nb = l.norm_bound();
            bound += diss.rate * nb * nb;
            jumps.push((diss.rate, l.clone(), l.adjoint()));
        }
        if !max_abs(&g).is_finite() {
            return Err(FdtError::NonFinite("LindbladGenerator::new"));
        }
        let g_op = Op::new(&g);
        bound += 2.0 * g_op.norm_bound();
        Ok(Self { hamiltonian, dissipators, g_adj: g_op.adjoint(), g: g_op, jumps, bound })
    }

    /// Purely Hamiltonian generator `−i[H, ·]`.
    pub fn unitary(hamiltonian: HermitianOperator) -> Self {
        Self::new(hamiltonian, Vec::new()).expect("no dissipators to validate")
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    /// Upper bound on the spectral radius of 𝓛; the RK4 stability
    /// requirement is `dt · norm_bound() ≤ 2.5`.
    pub fn norm_bound(&self) -> f64 {
        self.bound
    }

    /// Largest step the integrator accepts.
    pub fn max_stable_step(&self) -> f64 {
        if self.bound > 0.0 {
            RK4_STABILITY / self.bound
        } else {
            f64::INFINITY
        }
    }

    /// `𝓛(X)`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        self.g.left_acc(ONE, x, &mut out);
        self.g_adj.right_acc(ONE, x, &mut out);
        for (rate, l, l_adj) in &self.jumps {
            let lx = l.left(x);
            l_adj.right_acc(real(*rate), &lx, &mut out);
        }
        out
    }

    /// `𝓛†(B) = G†B + BG + Σ γ L†BL`.
    pub fn apply_adjoint(&self, b: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(b.nrows(), b.ncols());
        self.g_adj.left_acc(ONE, b, &mut out);
        self.g.right_acc(ONE, b, &mut out);
        for (rate, l, l_adj) in &self.jumps {
            let lb = l_adj.left(b);
            l.right_acc(real(*rate), &lb, &mut out);
        }
        out
    }

    /// Dense `d²×d²` generator matrix; intended for small dimensions.
    pub fn superoperator(&self) -> Superoperator {
        let d = self.dim();
        let id = CMatrix::identity(d, d);
        let h = self.hamiltonian.matrix();
        let mut m = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
        for diss in &self.dissipators {
            let l = &diss.jump;
            let ll = l.adjoint() * l;
            let term = l.map(|z| z.conj()).kronecker(l) - (id.kronecker(&ll) + ll.transpose().kronecker(&id)) * real(0.5);
            m += term * real(diss.rate);
        }
        Superoperator { matrix: m, dim: d, trace_preserving: false }
    }

    fn rk4_step(&self, x: &CMatrix, h: f64, adjoint: bool) -> CMatrix {
        let f = |y: &CMatrix| if adjoint { self.apply_adjoint(y) } else { self.apply(y) };
        let k1 = f(x);
        let k2 = f(&(x + &k1 * real(0.5 * h)));
        let k3 = f(&(x + &k2 * real(0.5 * h)));
        let k4 = f(&(x + &k3 * real(h)));
        x + (k1 + (k2 + k3) * real(2.0) + k4) * real(h / 6.0)
    }

    fn checked_steps(&self, t: f64, dt: f64) -> Result<(usize, f64)> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(FdtError::invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(FdtError::invalid("t_final", format!("must be nonnegative, got {t}")));
        }
        if dt * self.bound > RK4_STABILITY {
            return Err(FdtError::StepTooLarge { dt, bound: self.max_stable_step() });
        }
        let n = (t / dt - 1e-9).ceil().max(0.0) as usize;
        Ok((n, if n == 0 { 0.0 } else { t / n as f64 }))
    }

    /// Propagates an operator by `e^{t𝓛}` with RK4 steps no longer than `dt`.
    pub fn evolve_matrix(&self, x: &CMatrix, t: f64, dt: f64) -> Result<CMatrix> {
        let (n, h) = self.checked_steps(t, dt)?;
        let mut y = x.clone();
        for _ in 0..n {
            y = self.rk4_step(&y, h, false);
        }
        Ok(y)
    }

    /// Heisenberg propagation `e^{t𝓛†}(B)`.
    pub fn evolve_observable(&self, b: &CMatrix, t: f64, dt: f64) -> Result<CMatrix> {
        let (n, h) = self.checked_steps(t, dt)?;
        let mut y = b.clone();
        for _ in 0..n {
            y = self.rk4_step(&y, h, true);
        }
        Ok(y)
    }

    /// Expectation values `Tr[O_k ρ(t_j)]` on the grid `t_j = j·dt`,
    /// `j = 0..=n_steps`. Cheaper than [`lindblad_evolve`] for large
    /// dimensions: states are not stored and positivity is checked only
    /// on the final state.
    pub fn expectation_series(
        &self,
        rho: &DensityMatrix,
        observables: &[&CMatrix],
        dt: f64,
        n_steps: usize,
    ) -> Result<Vec<Vec<f64>>> {
        check_dims(self.dim(), rho.dim())?;
        self.checked_steps(dt, dt)?;
        let mut y = rho.matrix().clone();
        let mut out = vec![Vec::with_capacity(n_steps + 1); observables.len()];
        let record = |y: &CMatrix, out: &mut Vec<Vec<f64>>| {
            for (k, o) in observables.iter().enumerate() {
                out[k].push(crate::operator_core::trace_product(o, y).re);
            }
        };
        record(&y, &mut out);
        for step in 1..=n_steps {
            y = self.rk4_step(&y, dt, false);
            let tr = y.trace();
            if (tr.re - 1.0).abs() > 1e-8 || !tr.re.is_finite() {
                return Err(FdtError::NonFinite("expectation_series trace drift"));
            }
            if step == n_steps {
                let final_state = HermitianOperator::from_hermitian_part(&y);
                let min = eig_hermitian(&final_state)?.eigenvalues[0];
                if min < -1e-8 {
                    return Err(FdtError::PositivityBreach { time: dt * step as f64, min_eigenvalue: min });
                }
            }
            record(&y, &mut out);
        }
        Ok(out)
    }

    /// Discrete-time propagator `e^{Δt𝓛}`: exact superoperator exponential
    /// for dimensions up to 20, composed RK4 steps above.
    pub fn to_channel(&self, dt: f64) -> Result<LindbladPropagator> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(FdtError::invalid("dt", format!("must be positive, got {dt}")));
        }
        let kind = if self.dim() <= EXACT_PROPAGATOR_DIM {
            let exp = (self.superoperator().matrix * real(dt)).exp();
            PropagatorKind::Exact(Superoperator { matrix: exp, dim: self.dim(), trace_preserving: true })
        } else {
            let substeps = (dt * self.bound / PROPAGATOR_STEP_SCALE).ceil().max(1.0) as usize;
            PropagatorKind::Integrated { substeps }
        };
        Ok(LindbladPropagator { generator: self.clone(), dt, kind })
    }

    /// Second-order Kraus discretization of `e^{Δt𝓛}`: Strang splitting
    /// of the no-jump evolution around a second-order jump expansion,
    /// renormalized to be exactly trace preserving.
    pub fn trotter_kraus(&self, dt: f64) -> Result<KrausChannel> {
        let d = self.dim();
        let mut g = self.hamiltonian.matrix() * (-I);
        for diss in &self.dissipators {
            g.gemm(real(-0.5 * diss.rate), &diss.jump.adjoint(), &diss.jump, ONE);
        }
        let half = (g * real(0.5 * dt)).exp();
        let mut middle = vec![CMatrix::identity(d, d)];
        for a in &self.dissipators {
            middle.push(&a.jump * real((a.rate * dt).sqrt()));
        }
        for a in &self.dissipators {
            for b in &self.dissipators {
                middle.push(&a.jump * &b.jump * real(dt * (0.5 * a.rate * b.rate).sqrt()));
            }
        }
        let ops: Vec<CMatrix> = middle.iter().map(|m| &half * m * &half).collect();
        let mut p = CMatrix::zeros(d, d);
        for k in &ops {
            p.gemm(ONE, &k.adjoint(), k, ONE);
        }
        let spec = eig_hermitian(&HermitianOperator::from_hermitian_part(&p))?;
        let inv_sqrt = spec.map(|e| real(1.0 / e.sqrt()));
        KrausChannel::new(ops.into_iter().map(|k| k * &inv_sqrt).collect())
    }
}

#[derive(Clone, Debug)]
enum PropagatorKind {
    Exact(Superoperator),
    Integrated { substeps: usize },
}

/// `e^{Δt𝓛}` as a [`Channel`].
#[derive(Clone, Debug)]
pub struct LindbladPropagator {
    generator: LindbladGenerator,
    dt: f64,
    kind: PropagatorKind,
}

impl LindbladPropagator {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, PropagatorKind::Exact(_))
    }

    pub fn generator(&self) -> &LindbladGenerator {
        &self.generator
    }
}

impl Channel for LindbladPropagator {
    fn dim(&self) -> usize {
        self.generator.dim()
    }

    fn map_matrix(&self, x: &CMatrix) -> CMatrix {
        match &self.kind {
            PropagatorKind::Exact(s) => s.apply(x),
            PropagatorKind::Integrated { substeps } => {
                let h = self.dt / *substeps as f64;
                (0..*substeps).fold(x.clone(), |y, _| self.generator.rk4_step(&y, h, false))
            }
        }
    }

    fn adjoint_map_matrix(&self, x: &CMatrix) -> CMatrix {
        match &self.kind {
            PropagatorKind::Exact(s) => s.adjoint_map_matrix(x),
            PropagatorKind::Integrated { substeps } => {
                let h = self.dt / *substeps as f64;
                (0..*substeps).fold(x.clone(), |y, _| self.generator.rk4_step(&y, h, true))
            }
        }
    }

    fn superoperator(&self) -> Superoperator {
        match &self.kind {
            PropagatorKind::Exact(s) => s.clone(),
            PropagatorKind::Integrated { .. } => {
                let d = self.dim();
                let mut m = CMatrix::zeros(d * d, d * d);
                let mut unit = CMatrix::zeros(d, d);
                for j in 0..d {
                    for i in 0..d {
                        unit[(i, j)] = ONE;
                        m.set_column(i + j * d, &vectorize(&self.map_matrix(&unit)));
                        unit[(i, j)] = ZERO;
                    }
                }
                Superoperator { matrix: m, dim: d, trace_preserving: true }
            }
        }
    }
}

/// One member ξ_λ of a family.
#[derive(Clone, Debug)]
pub enum MarkovModel {
    Kraus(KrausChannel),
    Lindblad(LindbladGenerator),
}

impl MarkovModel {
    pub fn dim(&self) -> usize {
        match self {
            MarkovModel::Kraus(k) => k.dim(),
            MarkovModel::Lindblad(g) => g.dim(),
        }
    }

    /// Channel superoperator, or the generator matrix for Lindblad models.
    pub fn superoperator(&self) -> Superoperator {
        match self {
            MarkovModel::Kraus(k) => k.superoperator(),
            MarkovModel::Lindblad(g) => g.superoperator(),
        }
    }

    /// Invariant state of the channel or stationary state of the generator.
    pub fn fixed_point(&self) -> Result<DensityMatrix> {
        match self {
            MarkovModel::Kraus(k) => fixed_point(k),
            MarkovModel::Lindblad(g) => stationary_state(g),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, MarkovModel::Lindblad(_))
    }
}

type Evaluator = dyn Fn(f64) -> Result<MarkovModel> + Send + Sync;

/// λ ↦ ξ_λ, evaluated lazily around a reference point λ₀.
#[derive(Clone)]
pub struct ChannelFamily {
    evaluator: Arc<Evaluator>,
    lambda0: f64,
}

impl fmt::Debug for ChannelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelFamily").field("lambda0", &self.lambda0).finish_non_exhaustive()
    }
}

impl ChannelFamily {
    pub fn new(evaluator: impl Fn(f64) -> Result<MarkovModel> + Send + Sync + 'static) -> Self {
        Self { evaluator: Arc::new(evaluator), lambda0: 0.0 }
    }

    pub fn kraus(f: impl Fn(f64) -> Result<KrausChannel> + Send + Sync + 'static) -> Self {
        Self::new(move |l| f(l).map(MarkovModel::Kraus))
    }

    pub fn lindblad(f: impl Fn(f64) -> Result<LindbladGenerator> + Send + Sync + 'static) -> Self {
        Self::new(move |l| f(l).map(MarkovModel::Lindblad))
    }

    /// λ-independent family.
    pub fn constant(model: MarkovModel) -> Self {
        Self::new(move |_| Ok(model.clone()))
    }

    /// Kraus operators `K_j(λ) = ⟨j|e^{−i(G₀+λG₁)}|0⟩_E` of a dilation on
    /// `E ⊗ S`, where `dim` is the system dimension and the environment
    /// index is the slow one.
    pub fn stinespring(g0: HermitianOperator, g1: HermitianOperator, dim: usize) -> Result<Self> {
        check_dims(g0.dim(), g1.dim())?;
        if dim == 0 || !g0.dim().is_multiple_of(dim) {
            return Err(FdtError::invalid("dim", format!("{dim} does not divide {}", g0.dim())));
        }
        let n_env = g0.dim() / dim;
        Ok(Self::kraus(move |lambda| {
            let u = crate::operator_core::matrix_exponential_action(
                &g0.add_scaled(lambda, &g1)?,
                1.0,
                crate::operator_core::ExpMode::Unitary,
            )?;
            let ops = (0..n_env).map(|j| u.view((j * dim, 0), (dim, dim)).into_owned()).collect();
            KrausChannel::new(ops)
        }))
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = lambda0;
        self
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn evaluate(&self, lambda: f64) -> Result<MarkovModel> {
        (self.evaluator)(lambda)
    }

    /// ξ₀ = ξ_{λ₀}.
    pub fn reference(&self) -> Result<MarkovModel> {
        self.evaluate(self.lambda0)
    }
}

fn null_vector(m: &CMatrix) -> Result<(DVector<Complex64>, usize)> {
    let svd = SVD::try_new(m.clone(), false, true, f64::EPSILON, 0).ok_or(FdtError::EigenFailure)?;
    let s = &svd.singular_values;
    let threshold = 1e-9 * s.max().max(1.0);
    let multiplicity = s.iter().filter(|&&x| x <= threshold).count();
    let v_t = svd.v_t.as_ref().ok_or(FdtError::EigenFailure)?;
    let k = s.imin();
    let v = v_t.row(k).adjoint();
    Ok((v, multiplicity))
}

fn state_from_vector(v: &DVector<Complex64>, dim: usize) -> Result<DensityMatrix> {
    let m = unvectorize(v, dim);
    let tr = m.trace();
    if tr.norm() < 1e-14 {
        return Err(FdtError::Singular("null vector has zero trace"));
    }
    let m = hermitian_part(&(m / tr));
    DensityMatrix::new(HermitianOperator::from_hermitian_part(&m))
}

fn start_states(dim: usize) -> [CMatrix; 2] {
    let a = CMatrix::identity(dim, dim) * real(1.0 / dim as f64);
    let psi = DVector::from_fn(dim, |k, _| Complex64::from_polar(1.0 + k as f64, 0.7 * k as f64));
    let psi = &psi / Complex64::new(psi.norm(), 0.0);
    let b = &psi * psi.adjoint();
    [a, b]
}

/// Invariant state of a channel.
///
/// Dense null-space solve of `S − I` up to dimension 12; above that,
/// power iteration from two distinct initial states, with disagreement
/// reported as a degenerate fixed-point space.
pub fn fixed_point(channel: &dyn Channel) -> Result<DensityMatrix> {
    let d = channel.dim();
    let pi = if d <= DENSE_FIXED_POINT_DIM {
        let s = channel.superoperator();
        let m = s.matrix - CMatrix::identity(d * d, d * d);
        let (v, multiplicity) = null_vector(&m)?;
        if multiplicity > 1 {
            return Err(FdtError::DegenerateFixedPoint { multiplicity });
        }
        state_from_vector(&v, d)?
    } else {
        let mut found: Vec<CMatrix> = Vec::new();
        for start in start_states(d) {
            let mut x = start;
            let mut converged = false;
            for _ in 0..1_000_000 {
                let next = channel.map_matrix(&x);
                let change = max_abs(&(&next - &x));
                x = next;
                if change <= 1e-13 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(FdtError::NoConvergence { iterations: 1_000_000, residual: max_abs(&(channel.map_matrix(&x) - &x)) });
            }
            found.push(x);
        }
        if max_abs(&(&found[0] - &found[1])) > 1e-8 {
            return Err(FdtError::DegenerateFixedPoint { multiplicity: 2 });
        }
        state_from_vector(&vectorize(&found.swap_remove(0)), d)?
    };
    let residual = max_abs(&(channel.map_matrix(pi.matrix()) - pi.matrix()));
    if residual > FIXED_POINT_TOL {
        return Err(FdtError::NotInvariant { residual, tolerance: FIXED_POINT_TOL });
    }
    Ok(pi)
}

/// Stationary state `𝓛(π) = 0`, with the same dense/iterative split as
/// [`fixed_point`]; the iterative route integrates `ρ̇ = 𝓛ρ` to
/// convergence.
pub fn stationary_state(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    let d = gen.dim();
    let pi = if d <= DENSE_FIXED_POINT_DIM {
        let (v, multiplicity) = null_vector(gen.superoperator().matrix())?;
        if multiplicity > 1 {
            return Err(FdtError::DegenerateFixedPoint { multiplicity });
        }
        state_from_vector(&v, d)?
    } else {
        let h = 0.8 * gen.max_stable_step().min(1.0);
        let max_steps = 20_000_000usize;
        let mut found: Vec<CMatrix> = Vec::new();
        for start in start_states(d) {
            let mut x = start;
            let mut steps = 0;
            loop {
                for _ in 0..64 {
                    x = gen.rk4_step(&x, h, false);
                }
                steps += 64;
                let r = max_abs(&gen.apply(&x));
                if r <= 1e-12 {
                    break;
                }
                if steps >= max_steps {
                    return Err(FdtError::NoConvergence { iterations: steps, residual: r });
                }
            }
            found.push(x);
        }
        if max_abs(&(&found[0] - &found[1])) > 1e-8 {
            return Err(FdtError::DegenerateFixedPoint { multiplicity: 2 });
        }
        state_from_vector(&vectorize(&found.swap_remove(0)), d)?
    };
    let residual = max_abs(&gen.apply(pi.matrix()));
    if residual > FIXED_POINT_TOL {
        return Err(FdtError::NotInvariant { residual, tolerance: FIXED_POINT_TOL });
    }
    Ok(pi)
}

/// `ρ ↦ ξ(ρ)` with trace-preservation and positivity checks.
pub fn apply(channel: &dyn Channel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dims(channel.dim(), rho.dim())?;
    let out = channel.map_matrix(rho.matrix());
    let trace = out.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(FdtError::TraceViolation { trace, tolerance: TRACE_TOL });
    }
    DensityMatrix::new(HermitianOperator::from_hermitian_part(&out))
}

/// `B ↦ ξ̃(B)`, the Heisenberg-picture action.
pub fn adjoint_apply(channel: &dyn Channel, b: &HermitianOperator) -> Result<HermitianOperator> {
    check_dims(channel.dim(), b.dim())?;
    Ok(HermitianOperator::from_hermitian_part(&channel.adjoint_map_matrix(b.matrix())))
}

/// States of a trajectory on a uniform grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Step-halving estimate of the global error at `t_final`, per unit time.
    pub error_estimate: f64,
}

/// Integrates `ρ̇ = 𝓛ρ` with classical RK4.
///
/// The step is shortened so that an integer number of steps reaches
/// `t_final`; it must satisfy `dt · gen.norm_bound() ≤ 2.5`. Every stored
/// point is validated as a state, and the error estimate compares against
/// a second run at half the step.
pub fn lindblad_evolve(gen: &LindbladGenerator, rho: &DensityMatrix, t_final: f64, dt: f64) -> Result<Trajectory> {
    check_dims(gen.dim(), rho.dim())?;
    let (n, h) = gen.checked_steps(t_final, dt)?;
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    let mut x = rho.matrix().clone();
    for k in 1..=n {
        x = gen.rk4_step(&x, h, false);
        let t = k as f64 * h;
        let op = HermitianOperator::from_hermitian_part(&x);
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(FdtError::TraceViolation { trace, tolerance: TRACE_TOL });
        }
        let min = eig_hermitian(&op)?.eigenvalues[0];
        if min < crate::operator_core::POSITIVITY_FLOOR {
            return Err(FdtError::PositivityBreach { time: t, min_eigenvalue: min });
        }
        times.push(t);
        states.push(DensityMatrix::from_trusted(op));
    }
    let error_estimate = if n == 0 {
        0.0
    } else {
        let mut fine = rho.matrix().clone();
        for _ in 0..2 * n {
            fine = gen.rk4_step(&fine, 0.5 * h, false);
        }
        max_abs(&(fine - x)) * 16.0 / 15.0 / t_final
    };
    Ok(Trajectory { times, states, error_estimate })
}

fn richardson_check(coarse: &CMatrix, fine: &CMatrix, what: &str) {
    let scale = max_abs(fine);
    let diff = max_abs(&(coarse - fine));
    if scale > 0.0 && diff > 1e-4 * scale {
        log::warn!("{what}: central differences at h and h/2 disagree by {:.3e} (relative)", diff / scale);
    }
}

fn central_difference(family: &ChannelFamily, h: f64) -> Result<CMatrix> {
    let l0 = family.lambda0();
    let plus = family.evaluate(l0 + h)?.superoperator();
    let minus = family.evaluate(l0 - h)?.superoperator();
    let d = (plus.matrix - minus.matrix) * real(0.5 / h);
    if !max_abs(&d).is_finite() {
        return Err(FdtError::NonFinite("channel_derivative"));
    }
    Ok(d)
}

/// ξ₁ (or 𝓛₁ for Lindblad families) by central differences at `λ₀ ± h`,
/// with a Richardson consistency check at `h/2` that logs a warning when
/// the relative disagreement exceeds 1e-4.
pub fn channel_derivative(family: &ChannelFamily, h: f64) -> Result<Superoperator> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FdtError::invalid("h", format!("must be positive, got {h}")));
    }
    let coarse = central_difference(family, h)?;
    let fine = central_difference(family, 0.5 * h)?;
    richardson_check(&coarse, &fine, "channel_derivative");
    Superoperator::new(coarse, false)
}

/// π₁ from both routes.
#[derive(Clone, Debug)]
pub struct InvariantStateDerivative {
    /// `(π_{λ₀+h} − π_{λ₀−h}) / 2h`
    pub finite_difference: HermitianOperator,
    /// Solution of `(𝟙 − ξ₀)π₁ = ξ₁(π₀)` (or `𝓛₀π₁ = −𝓛₁π₀`) on the
    /// traceless subspace.
    pub linear_solve: HermitianOperator,
}

/// Finite difference of fixed points.
pub fn invariant_state_derivative_fd(family: &ChannelFamily, h: f64) -> Result<HermitianOperator> {
    let l0 = family.lambda0();
    let plus = family.evaluate(l0 + h)?.fixed_point()?;
    let minus = family.evaluate(l0 - h)?.fixed_point()?;
    let d = (plus.matrix() - minus.matrix()) * real(0.5 / h);
    Ok(HermitianOperator::from_hermitian_part(&d))
}

/// Linear-response solve for π₁ with the trace functional replacing one
/// redundant row of `𝟙 − ξ₀`.
pub fn invariant_state_derivative_solve(family: &ChannelFamily, h: f64) -> Result<HermitianOperator> {
    let model = family.reference()?;
    let pi0 = model.fixed_point()?;
    let xi1 = channel_derivative(family, h)?;
    let s0 = model.superoperator();
    let d = model.dim();
    let n = d * d;
    let (mut a, mut rhs) = if model.is_continuous() {
        (s0.matrix, -(xi1.matrix() * vectorize(pi0.matrix())))
    } else {
        (CMatrix::identity(n, n) - s0.matrix, xi1.matrix() * vectorize(pi0.matrix()))
    };
    let original = a.clone();
    let target = rhs.clone();
    for c in 0..n {
        a[(0, c)] = ZERO;
    }
    for k in 0..d {
        a[(0, k * (d + 1))] = ONE;
    }
    rhs[0] = ZERO;
    let x = a.lu().solve(&rhs).ok_or(FdtError::Singular("(1 - ξ₀) on the traceless subspace"))?;
    let vmax = |v: &DVector<Complex64>| v.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let residual = vmax(&(&original * &x - &target));
    let scale = vmax(&target);
    if !residual.is_finite() || residual > 1e-8 * scale.max(1.0) {
        return Err(FdtError::Singular("(1 - ξ₀) on the traceless subspace"));
    }
    Ok(HermitianOperator::from_hermitian_part(&unvectorize(&x, d)))
}

/// π₁ by both routes, which must agree within `max(1e-6, 10h²)`.
pub fn invariant_state_derivative(family: &ChannelFamily, h: f64) -> Result<InvariantStateDerivative> {
    let finite_difference = invariant_state_derivative_fd(family, h)?;
    let linear_solve = invariant_state_derivative_solve(family, h)?;
    let difference = max_abs(&(finite_difference.matrix() - linear_solve.matrix()));
    let tolerance = (10.0 * h * h).max(1e-6);
    if difference > tolerance {
        return Err(FdtError::RouteDisagreement { quantity: "π₁", difference, tolerance });
    }
    Ok(InvariantStateDerivative { finite_difference, linear_solve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_core::{expectation, thermal_state, trace_product};
    use crate::random::{
        random_density_matrix, random_hermitian, random_lindblad_generator, random_stinespring_family, random_unitary,
        rng_from_seed,
    };
    use proptest::prelude::*;

    fn kraus_of(family: &ChannelFamily, l: f64) -> KrausChannel {
        match family.evaluate(l).unwrap() {
            MarkovModel::Kraus(k) => k,
            _ => unreachable!(),
        }
    }

    fn lowering(n: usize) -> CMatrix {
        let mut a = CMatrix::zeros(n, n);
        for k in 1..n {
            a[(k - 1, k)] = real((k as f64).sqrt());
        }
        a
    }

    #[test]
    fn rejects_non_trace_preserving() {
        let k = CMatrix::identity(2, 2) * real(0.9);
        assert!(matches!(KrausChannel::new(vec![k]), Err(FdtError::NotTracePreserving { .. })));
        assert!(KrausChannel::new(vec![]).is_err());
    }

    #[test]
    fn identity_and_depolarizing() {
        let mut rng = rng_from_seed(10);
        let rho = random_density_matrix(&mut rng, 2);
        let out = apply(&KrausChannel::identity(2), &rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);
        let dep = KrausChannel::depolarizing(2, 1.0).unwrap();
        let out = apply(&dep, &rho).unwrap();
        assert!(max_abs(&(out.matrix() - CMatrix::identity(2, 2) * real(0.5))) < 1e-15);
    }

    #[test]
    fn apply_matches_vectorized_superoperator() {
        let mut rng = rng_from_seed(11);
        let family = random_stinespring_family(&mut rng, 3, 2);
        let k = kraus_of(&family, 0.2);
        let rho = random_density_matrix(&mut rng, 3);
        let direct = apply(&k, &rho).unwrap();
        let s = k.superoperator();
        assert!(max_abs(&(s.apply(rho.matrix()) - direct.matrix())) < 1e-13);
        let generic = <KrausChannel as Channel>::superoperator(&k);
        let basis_built = Channel::superoperator(&Superoperator::new(generic.matrix().clone(), true).unwrap());
        assert!(max_abs(&(basis_built.matrix() - s.matrix())) < 1e-13);
        assert!(matches!(apply(&k, &random_density_matrix(&mut rng, 2)), Err(FdtError::DimensionMismatch { .. })));
    }

    #[test]
    fn adjoint_examples() {
        let mut rng = rng_from_seed(12);
        let family = random_stinespring_family(&mut rng, 3, 3);
        let k = kraus_of(&family, 0.0);
        let id = adjoint_apply(&k, &HermitianOperator::identity(3)).unwrap();
        assert!(max_abs(&(id.matrix() - CMatrix::identity(3, 3))) < 1e-13);

        let u = random_unitary(&mut rng, 3);
        let b = random_hermitian(&mut rng, 3, 1.0);
        let out = adjoint_apply(&KrausChannel::unitary(u.clone()).unwrap(), &b).unwrap();
        assert!(max_abs(&(out.matrix() - u.adjoint() * b.matrix() * &u)) < 1e-13);
    }

    #[test]
    fn superoperator_adjoint_matches_kraus_adjoint() {
        let mut rng = rng_from_seed(13);
        let k = kraus_of(&random_stinespring_family(&mut rng, 3, 2), 0.1);
        let s = k.superoperator();
        let b = random_hermitian(&mut rng, 3, 1.0);
        let lhs = s.adjoint_map_matrix(b.matrix());
        assert!(max_abs(&(lhs - k.adjoint_map_matrix(b.matrix()))) < 1e-13);
        assert!((s.leading_eigenvalue_magnitude().unwrap() - 1.0).abs() < 1e-10);
        assert!(s.trace_defect() < 1e-12);
    }

    #[test]
    fn fixed_point_examples() {
        let dep = KrausChannel::depolarizing(2, 0.3).unwrap();
        let pi = fixed_point(&dep).unwrap();
        assert!(max_abs(&(pi.matrix() - CMatrix::identity(2, 2) * real(0.5))) < 1e-12);

        let ad = KrausChannel::amplitude_damping(1.0).unwrap();
        let pi = fixed_point(&ad).unwrap();
        assert!(max_abs(&(pi.matrix() - DensityMatrix::basis_state(2, 0).unwrap().matrix())) < 1e-12);

        assert!(matches!(fixed_point(&KrausChannel::identity(2)), Err(FdtError::DegenerateFixedPoint { multiplicity: 4 })));
    }

    #[test]
    fn iterative_fixed_point_matches_dense() {
        let mut rng = rng_from_seed(14);
        let family = random_stinespring_family(&mut rng, 13, 2);
        let k = kraus_of(&family, 0.0);
        let pi = fixed_point(&k).unwrap();
        let s = k.superoperator();
        let m = s.matrix() - CMatrix::identity(169, 169);
        let (v, mult) = null_vector(&m).unwrap();
        assert_eq!(mult, 1);
        let dense = state_from_vector(&v, 13).unwrap();
        assert!(max_abs(&(pi.matrix() - dense.matrix())) < 1e-10);
        assert!(matches!(fixed_point(&KrausChannel::identity(13)), Err(FdtError::DegenerateFixedPoint { .. })));
    }

    #[test]
    fn generator_annihilates_trace_and_matches_superoperator() {
        let mut rng = rng_from_seed(15);
        let gen = random_lindblad_generator(&mut rng, 4, 2);
        let rho = random_density_matrix(&mut rng, 4);
        let lr = gen.apply(rho.matrix());
        assert!(lr.trace().norm() < 1e-12);
        let s = gen.superoperator();
        assert!(max_abs(&(s.apply(rho.matrix()) - &lr)) < 1e-12);
        let b = random_hermitian(&mut rng, 4, 1.0);
        let dual = trace_product(b.matrix(), &lr) - trace_product(&gen.apply_adjoint(b.matrix()), rho.matrix());
        assert!(dual.norm() < 1e-12);
    }

    #[test]
    fn closed_diagonal_system_keeps_populations() {
        let h = HermitianOperator::diagonal(&[0.0, 0.7, 1.9]).unwrap();
        let gen = LindbladGenerator::unitary(h);
        let mut rng = rng_from_seed(16);
        let rho = random_density_matrix(&mut rng, 3);
        let traj = lindblad_evolve(&gen, &rho, 5.0, 0.01).unwrap();
        for s in &traj.states {
            for k in 0..3 {
                assert!((s.matrix()[(k, k)] - rho.matrix()[(k, k)]).norm() < 1e-12);
            }
        }
    }

    fn damped_oscillator(n: usize, gamma: f64, nbar: f64) -> LindbladGenerator {
        let a = lowering(n);
        let num = a.adjoint() * &a;
        LindbladGenerator::new(
            HermitianOperator::new(num).unwrap(),
            vec![Dissipator::new(a.clone(), gamma * (nbar + 1.0)).unwrap(), Dissipator::new(a.adjoint(), gamma * nbar).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn damped_oscillator_occupation_relaxes() {
        // ⟨a†a⟩(t) = e^{−γt}n₀ + N(1 − e^{−γt}); the occupation N = 0.05
        // keeps truncation at 14 levels far below tolerance.
        let (n, gamma, nbar) = (14, 0.5, 0.05);
        let gen = damped_oscillator(n, gamma, nbar);
        let rho = DensityMatrix::basis_state(n, 2).unwrap();
        let traj = lindblad_evolve(&gen, &rho, 4.0, 0.01).unwrap();
        let num = HermitianOperator::new(lowering(n).adjoint() * lowering(n)).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = (-gamma * t).exp() * 2.0 + nbar * (1.0 - (-gamma * t).exp());
            assert!((expectation(s, &num).unwrap() - exact).abs() < 1e-8, "t = {t}");
        }
        assert!(traj.error_estimate <= 1e-8);
    }

    #[test]
    fn evolution_matches_exact_exponential() {
        let mut rng = rng_from_seed(17);
        let gen = random_lindblad_generator(&mut rng, 3, 2);
        let rho = random_density_matrix(&mut rng, 3);
        let traj = lindblad_evolve(&gen, &rho, 2.0, 0.01).unwrap();
        let exact = gen.to_channel(2.0).unwrap();
        assert!(exact.is_exact());
        let target = exact.map_matrix(rho.matrix());
        assert!(max_abs(&(traj.states.last().unwrap().matrix() - target)) < 1e-8);
        assert!(traj.error_estimate < 1e-8);
    }

    #[test]
    fn integrated_propagator_matches_exact() {
        let mut rng = rng_from_seed(18);
        let gen = random_lindblad_generator(&mut rng, 21, 1);
        let prop = gen.to_channel(0.5).unwrap();
        assert!(!prop.is_exact());
        let rho = random_density_matrix(&mut rng, 21);
        let fine = gen.evolve_matrix(rho.matrix(), 0.5, 1e-3).unwrap();
        let err = max_abs(&(prop.map_matrix(rho.matrix()) - fine));
        assert!(err < 1e-8, "{err}");
        let b = random_hermitian(&mut rng, 21, 1.0);
        let lhs = trace_product(b.matrix(), &prop.map_matrix(rho.matrix()));
        let rhs = trace_product(&prop.adjoint_map_matrix(b.matrix()), rho.matrix());
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn step_size_bound_enforced() {
        let mut rng = rng_from_seed(19);
        let gen = random_lindblad_generator(&mut rng, 3, 1);
        let rho = random_density_matrix(&mut rng, 3);
        let dt = 2.0 * gen.max_stable_step();
        assert!(matches!(lindblad_evolve(&gen, &rho, 1.0, dt), Err(FdtError::StepTooLarge { .. })));
    }

    #[test]
    fn trotter_kraus_converges_at_second_order() {
        let gen = damped_oscillator(6, 0.4, 0.3);
        let rho = DensityMatrix::basis_state(6, 3).unwrap();
        let t = 2.0;
        let exact = lindblad_evolve(&gen, &rho, t, 1e-3).unwrap();
        let reference = exact.states.last().unwrap().matrix().clone();
        let errors: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| {
                let k = gen.trotter_kraus(dt).unwrap();
                let steps = (t / dt).round() as usize;
                let mut x = rho.clone();
                for _ in 0..steps {
                    x = apply(&k, &x).unwrap();
                }
                max_abs(&(x.matrix() - &reference))
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8 && order < 2.3, "observed order {order}, errors {errors:?}");
        }
    }

    #[test]
    fn stationary_state_of_thermal_damping() {
        let (n, nbar) = (6, 0.2);
        let gen = damped_oscillator(n, 1.0, nbar);
        let pi = stationary_state(&gen).unwrap();
        // Truncated detailed balance: p_k ∝ (N/(N+1))^k.
        let r = nbar / (nbar + 1.0);
        let z: f64 = (0..n).map(|k| r.powi(k as i32)).sum();
        for k in 0..n {
            assert!((pi.matrix()[(k, k)].re - r.powi(k as i32) / z).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_family_derivative_is_commutator() {
        let mut rng = rng_from_seed(20);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let a2 = a.clone();
        let family = ChannelFamily::kraus(move |l| {
            KrausChannel::unitary(
                crate::operator_core::matrix_exponential_action(&a2, l, crate::operator_core::ExpMode::Unitary).unwrap(),
            )
        });
        let xi1 = channel_derivative(&family, DEFAULT_STEP).unwrap();
        let rho = random_density_matrix(&mut rng, 3);
        let expected = crate::operator_core::commutator(a.matrix(), rho.matrix()).unwrap() * (-I);
        assert!(max_abs(&(xi1.apply(rho.matrix()) - expected)) < 1e-8);
        assert!(xi1.apply(rho.matrix()).trace().norm() < 1e-8);
    }

    #[test]
    fn constant_family_has_zero_derivatives() {
        let dep = KrausChannel::depolarizing(3, 0.4).unwrap();
        let family = ChannelFamily::constant(MarkovModel::Kraus(dep));
        assert_eq!(max_abs(channel_derivative(&family, 1e-4).unwrap().matrix()), 0.0);
        let d = invariant_state_derivative(&family, 1e-4).unwrap();
        assert!(d.finite_difference.max_norm() < 1e-12);
        assert!(d.linear_solve.max_norm() < 1e-12);
    }

    #[test]
    fn thermal_family_state_derivative_commuting_case() {
        // Generator of Gibbs states: a thermal-bath qubit with rates in
        // detailed balance at H(λ) = H₀ − λA, [H₀, A] = 0.
        let beta = 0.8;
        let h0 = [0.0, 1.3];
        let a = [0.4, -0.6];
        let family = ChannelFamily::lindblad(move |l| {
            let e: Vec<f64> = h0.iter().zip(&a).map(|(h, x)| h - l * x).collect();
            let gap = e[1] - e[0];
            let mut sigma = CMatrix::zeros(2, 2);
            sigma[(0, 1)] = ONE;
            LindbladGenerator::new(
                HermitianOperator::diagonal(&e)?,
                vec![Dissipator::new(sigma.clone(), 1.0)?, Dissipator::new(sigma.adjoint(), (-beta * gap).exp())?],
            )
        });
        let d = invariant_state_derivative(&family, 1e-4).unwrap();
        let (pi, _) = thermal_state(&HermitianOperator::diagonal(&h0).unwrap(), beta).unwrap();
        let p = [pi.matrix()[(0, 0)].re, pi.matrix()[(1, 1)].re];
        let mean = p[0] * a[0] + p[1] * a[1];
        for k in 0..2 {
            let expected = beta * (a[k] - mean) * p[k];
            assert!((d.linear_solve.matrix()[(k, k)].re - expected).abs() < 1e-8);
            assert!((d.finite_difference.matrix()[(k, k)].re - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_generator_reported() {
        let gen = LindbladGenerator::unitary(HermitianOperator::diagonal(&[0.0, 1.0]).unwrap());
        assert!(matches!(stationary_state(&gen), Err(FdtError::DegenerateFixedPoint { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn duality_holds(seed in any::<u64>(), dim in 2usize..=4, n_kraus in 1usize..=3) {
            let mut rng = rng_from_seed(seed);
            let k = kraus_of(&random_stinespring_family(&mut rng, dim, n_kraus), 0.3);
            for _ in 0..100 {
                let a = random_hermitian(&mut rng, dim, 1.0);
                let b = random_hermitian(&mut rng, dim, 1.0);
                let lhs = trace_product(a.matrix(), &k.map_matrix(b.matrix()));
                let rhs = trace_product(&k.adjoint_map_matrix(a.matrix()), b.matrix());
                prop_assert!((lhs - rhs).norm() <= 1e-10);
            }
        }

        #[test]
        fn fixed_point_is_invariant(seed in any::<u64>(), dim in 2usize..=4) {
            let mut rng = rng_from_seed(seed);
            let k = kraus_of(&random_stinespring_family(&mut rng, dim, 2), 0.0);
            let pi = fixed_point(&k).unwrap();
            let again = apply(&k, &pi).unwrap();
            prop_assert!(max_abs(&(again.matrix() - pi.matrix())) <= 1e-10);
            prop_assert!((k.superoperator().leading_eigenvalue_magnitude().unwrap() - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn state_derivative_routes_agree_and_are_traceless(seed in any::<u64>(), dim in 2usize..=3) {
            let mut rng = rng_from_seed(seed);
            let family = random_stinespring_family(&mut rng, dim, 2);
            let d = invariant_state_derivative(&family, DEFAULT_STEP).unwrap();
            prop_assert!(d.linear_solve.trace().abs() <= 1e-8);
            prop_assert!(d.finite_difference.trace().abs() <= 1e-8);
        }
    }
}
