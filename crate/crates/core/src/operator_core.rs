//! Dense complex linear algebra: Hermitian operators, density matrices,
//! spectral decompositions, exponentials, expectations and correlations.
//!
//! Units are ħ = k_B = 1 throughout, so commutator prefactors such as i/ħ
//! reduce to i and Boltzmann factors read e^{−βE}.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{FdtError, Result};

/// Dense complex matrix, column-major.
pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance of the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute tolerance on the unit trace of a state.
pub const TRACE_TOL: f64 = 1e-10;
/// Floor below which a negative eigenvalue counts as a positivity breach.
pub const POSITIVITY_FLOOR: f64 = -1e-12;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `Tr[XY]` without forming the product.
pub fn trace_product(x: &CMatrix, y: &CMatrix) -> Complex64 {
    let n = x.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += x[(i, j)] * y[(j, i)];
        }
    }
    acc
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(FdtError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Err(FdtError::EmptyOperator);
    }
    Ok(m.nrows())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(FdtError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A Hermitian matrix. Construction checks Hermiticity and then
/// symmetrizes the entries so downstream arithmetic sees an exactly
/// Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Validates and wraps `m`.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let scale = max_abs(&m);
        let deviation = max_abs(&(&m - m.adjoint()));
        let tolerance = HERMITIAN_TOL * scale;
        if !deviation.is_finite() || !scale.is_finite() {
            return Err(FdtError::NonFinite("HermitianOperator::new"));
        }
        if deviation > tolerance {
            return Err(FdtError::NotHermitian { deviation, tolerance });
        }
        Ok(Self { m: hermitian_part(&m) })
    }

    /// Builds from a real symmetric matrix.
    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    /// Wraps a matrix already known to be Hermitian up to rounding,
    /// symmetrizing it without the tolerance check.
    pub(crate) fn from_hermitian_part(m: &CMatrix) -> Self {
        Self { m: hermitian_part(m) }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(FdtError::EmptyOperator);
        }
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        Ok(Self { m: CMatrix::from_diagonal(&d) })
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * Complex64::new(s, 0.0) }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self { m: &self.m + &other.m * Complex64::new(s, 0.0) })
    }

    /// `self − c·I`.
    pub fn shift(&self, c: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= Complex64::new(c, 0.0);
        }
        Self { m }
    }
}

/// A positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    /// Checks unit trace and positivity (eigenvalues ≥ −1e-12).
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL || !trace.is_finite() {
            return Err(FdtError::TraceViolation { trace, tolerance: TRACE_TOL });
        }
        let spec = eig_hermitian(&op)?;
        let min_eigenvalue = spec.eigenvalues[0];
        if min_eigenvalue < POSITIVITY_FLOOR {
            return Err(FdtError::NotPositive { min_eigenvalue });
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scale(1.0 / dim as f64) }
    }

    /// Projector onto basis vector `k`.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(FdtError::invalid("k", format!("{k} out of range for dimension {dim}")));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Ok(Self { op: HermitianOperator { m } })
    }

    /// Diagonal state with the given populations.
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::diagonal(p)?)
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_trusted(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }
}

/// Eigen-decomposition `M = U diag(e) U^H` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U f(D) U^H` for a complex-valued scalar function.
    pub fn map(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let values: Vec<Complex64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        self.with_eigenvalues(&values)
    }

    /// `U diag(values) U^H`.
    pub fn with_eigenvalues(&self, values: &[Complex64]) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            for x in scaled.column_mut(j).iter_mut() {
                *x *= v;
            }
        }
        scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|e| Complex64::new(e, 0.0))
    }

    /// `U^H X U`.
    pub fn to_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * x * &self.eigenvectors
    }

    /// `U X U^H`.
    pub fn from_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        &self.eigenvectors * x * self.eigenvectors.adjoint()
    }
}

/// Hermitian eigen-decomposition with eigenvalues sorted ascending.
pub fn eig_hermitian(m: &HermitianOperator) -> Result<SpectralDecomposition> {
    let n = m.dim();
    let eig = SymmetricEigen::try_new(m.matrix().clone(), f64::EPSILON, 0).ok_or(FdtError::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        eigenvectors.set_column(j, &eig.eigenvectors.column(k));
    }
    if eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(FdtError::NonFinite("eig_hermitian"));
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Gibbs state `e^{−βH}/Z` and `ln Z`.
///
/// Weights are computed relative to the ground energy so that neither
/// large β nor large energies overflow.
pub fn thermal_state(h0: &HermitianOperator, beta: f64) -> Result<(DensityMatrix, f64)> {
    let spec = eig_hermitian(h0)?;
    thermal_state_from_spectrum(&spec, beta)
}

pub(crate) fn thermal_state_from_spectrum(spec: &SpectralDecomposition, beta: f64) -> Result<(DensityMatrix, f64)> {
    let p = thermal_populations(spec.eigenvalues.as_slice(), beta)?;
    let e0 = spec.eigenvalues[0];
    let z_shifted: f64 = spec.eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    let log_z = z_shifted.ln() - beta * e0;
    let values: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let m = spec.with_eigenvalues(&values);
    Ok((DensityMatrix::from_trusted(HermitianOperator::from_hermitian_part(&m)), log_z))
}

/// Boltzmann populations for ascending energies.
pub fn thermal_populations(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(FdtError::invalid("beta", format!("must be positive and finite, got {beta}")));
    }
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// `Tr[Bρ]`.
pub fn expectation(rho: &DensityMatrix, b: &HermitianOperator) -> Result<f64> {
    check_dims(rho.dim(), b.dim())?;
    let z = trace_product(b.matrix(), rho.matrix());
    debug_assert!(z.im.abs() <= 1e-12 * (1.0 + b.max_norm()) * rho.dim() as f64);
    Ok(z.re)
}

/// `½Tr[ρ(XY+YX)] − Tr[ρX]Tr[ρY]`.
pub fn symmetrized_correlation(rho: &DensityMatrix, x: &HermitianOperator, y: &HermitianOperator) -> Result<f64> {
    check_dims(rho.dim(), x.dim())?;
    check_dims(rho.dim(), y.dim())?;
    let rx = rho.matrix() * x.matrix();
    // Re Tr[ρXY] = ½Tr[ρ{X,Y}] for Hermitian ρ, X, Y.
    let sym = trace_product(&rx, y.matrix()).re;
    Ok(sym - expectation(rho, x)? * expectation(rho, y)?)
}

/// Selects the exponent of [`matrix_exponential_action`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpMode {
    /// `e^{−iHt}`
    Unitary,
    /// `e^{−Ht}`
    Real,
}

/// `e^{−iHt}` or `e^{−Ht}` via the spectral decomposition.
pub fn matrix_exponential_action(h: &HermitianOperator, t: f64, mode: ExpMode) -> Result<CMatrix> {
    let spec = eig_hermitian(h)?;
    Ok(spectral_exponential(&spec, t, mode))
}

pub(crate) fn spectral_exponential(spec: &SpectralDecomposition, t: f64, mode: ExpMode) -> CMatrix {
    match mode {
        ExpMode::Unitary => spec.map(|e| Complex64::from_polar(1.0, -e * t)),
        ExpMode::Real => spec.map(|e| Complex64::new((-e * t).exp(), 0.0)),
    }
}

/// `XY − YX`.
pub fn commutator(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    check_square(x)?;
    check_dims(x.nrows(), y.nrows())?;
    check_dims(x.ncols(), y.ncols())?;
    Ok(x * y - y * x)
}

/// `XY + YX`, Hermitian for Hermitian arguments.
pub fn anticommutator(x: &HermitianOperator, y: &HermitianOperator) -> Result<HermitianOperator> {
    check_dims(x.dim(), y.dim())?;
    let xy = x.matrix() * y.matrix();
    Ok(HermitianOperator::from_hermitian_part(&(&xy + xy.adjoint())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density_matrix, random_hermitian, rng_from_seed};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli() -> [CMatrix; 3] {
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        [
            CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            CMatrix::from_row_slice(2, 2, &[o, -I, I, o]),
            CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        ]
    }

    /// Truncated Taylor series with scaling and squaring.
    fn exp_series(a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let s = 10;
        let scaled = a * c(1.0 / f64::from(1 << s), 0.0);
        let mut term = CMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &scaled * c(1.0 / k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn rejects_non_hermitian_with_norm() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        match HermitianOperator::new(m) {
            Err(FdtError::NotHermitian { deviation, .. }) => assert!((deviation - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(HermitianOperator::new(CMatrix::zeros(2, 3)), Err(FdtError::NotSquare { .. })));
        assert!(matches!(HermitianOperator::new(CMatrix::zeros(0, 0)), Err(FdtError::EmptyOperator)));
    }

    #[test]
    fn pauli_z_eigenvalues_ascending() {
        let z = HermitianOperator::diagonal(&[1.0, -1.0]).unwrap();
        let s = eig_hermitian(&z).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn identity_has_orthonormal_basis() {
        let s = eig_hermitian(&HermitianOperator::identity(3)).unwrap();
        assert!(s.eigenvalues.iter().all(|&e| (e - 1.0).abs() < 1e-15));
        let g = s.eigenvectors.adjoint() * &s.eigenvectors;
        assert!(max_abs(&(g - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = rng_from_seed(1);
        let h = random_hermitian(&mut rng, 6, 1.0);
        let s = eig_hermitian(&h).unwrap();
        assert!(max_abs(&(s.reconstruct() - h.matrix())) <= 1e-10 * h.max_norm());
    }

    #[test]
    fn thermal_two_level() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0]).unwrap();
        let (rho, log_z) = thermal_state(&h, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((rho.matrix()[(0, 0)].re - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((rho.matrix()[(1, 1)].re - e / (1.0 + e)).abs() < 1e-15);
        assert!((log_z - (1.0 + e).ln()).abs() < 1e-15);
    }

    #[test]
    fn thermal_zero_temperature_limit() {
        let h = HermitianOperator::diagonal(&[0.0, 2.0]).unwrap();
        let (rho, log_z) = thermal_state(&h, 1e4).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(log_z.abs() < 1e-12);
        assert!(thermal_state(&h, 0.0).is_err());
        assert!(thermal_state(&h, -1.0).is_err());
    }

    #[test]
    fn thermal_large_energies_do_not_overflow() {
        let h = HermitianOperator::diagonal(&[-800.0, -799.0]).unwrap();
        let (rho, log_z) = thermal_state(&h, 1.0).unwrap();
        assert!((rho.operator().trace() - 1.0).abs() < 1e-14);
        assert!((log_z - (800.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-10);
    }

    #[test]
    fn expectation_examples() {
        let z = HermitianOperator::diagonal(&[1.0, -1.0]).unwrap();
        assert_eq!(expectation(&DensityMatrix::maximally_mixed(2), &z).unwrap(), 0.0);
        let b = HermitianOperator::diagonal(&[3.5, -2.0]).unwrap();
        assert_eq!(expectation(&DensityMatrix::basis_state(2, 0).unwrap(), &b).unwrap(), 3.5);
        let mismatch = HermitianOperator::identity(3);
        assert!(matches!(expectation(&DensityMatrix::maximally_mixed(2), &mismatch), Err(FdtError::DimensionMismatch { .. })));
    }

    #[test]
    fn expectation_matches_eigenbasis_expansion() {
        let mut rng = rng_from_seed(2);
        let rho = random_density_matrix(&mut rng, 5);
        let b = random_hermitian(&mut rng, 5, 1.0);
        let s = eig_hermitian(rho.operator()).unwrap();
        let bb = s.to_eigenbasis(b.matrix());
        let oracle: f64 = (0..5).map(|n| s.eigenvalues[n] * bb[(n, n)].re).sum();
        assert!((expectation(&rho, &b).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn correlation_classical_limit() {
        let rho = DensityMatrix::from_populations(&[0.5, 0.3, 0.2]).unwrap();
        let x = HermitianOperator::diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let y = HermitianOperator::diagonal(&[0.0, -1.0, 3.0]).unwrap();
        let mx = 0.5 + 0.6 + 0.8;
        let my = -0.3 + 0.6;
        let cov = 0.5 * (1.0 - mx) * (0.0 - my) + 0.3 * (2.0 - mx) * (-1.0 - my) + 0.2 * (4.0 - mx) * (3.0 - my);
        assert!((symmetrized_correlation(&rho, &x, &y).unwrap() - cov).abs() < 1e-14);
    }

    #[test]
    fn correlation_matches_brute_force() {
        let mut rng = rng_from_seed(3);
        let rho = random_density_matrix(&mut rng, 4);
        let x = random_hermitian(&mut rng, 4, 1.0);
        let y = random_hermitian(&mut rng, 4, 1.0);
        let (r, xm, ym) = (rho.matrix(), x.matrix(), y.matrix());
        let anti = xm * ym + ym * xm;
        let brute = 0.5 * (r * anti).trace().re - (r * xm).trace().re * (r * ym).trace().re;
        assert!((symmetrized_correlation(&rho, &x, &y).unwrap() - brute).abs() < 1e-13);
    }

    #[test]
    fn exponential_examples() {
        let mut rng = rng_from_seed(4);
        let h = random_hermitian(&mut rng, 5, 1.0);
        let id = matrix_exponential_action(&h, 0.0, ExpMode::Unitary).unwrap();
        assert!(max_abs(&(id - CMatrix::identity(5, 5))) < 1e-13);

        let z = HermitianOperator::new(pauli()[2].clone()).unwrap();
        let u = matrix_exponential_action(&z, std::f64::consts::FRAC_PI_2, ExpMode::Unitary).unwrap();
        assert!((u[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((u[(1, 1)] - c(0.0, 1.0)).norm() < 1e-15);

        let u = matrix_exponential_action(&h, 0.3, ExpMode::Unitary).unwrap();
        let oracle = exp_series(&(h.matrix() * c(0.0, -0.3)));
        assert!(max_abs(&(&u - oracle)) < 1e-12);
        assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(5, 5))) < 1e-10);

        let r = matrix_exponential_action(&h, 0.3, ExpMode::Real).unwrap();
        let oracle = exp_series(&(h.matrix() * c(-0.3, 0.0)));
        assert!(max_abs(&(r - oracle)) < 1e-12);
    }

    #[test]
    fn commutator_examples() {
        let [x, y, z] = pauli();
        assert!(max_abs(&commutator(&x, &x).unwrap()) == 0.0);
        let xy = commutator(&x, &y).unwrap();
        assert!(max_abs(&(xy - z * c(0.0, 2.0))) < 1e-15);
        assert!(commutator(&x, &CMatrix::identity(3, 3)).is_err());

        let mut rng = rng_from_seed(5);
        let a = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let b = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let cc = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let br = |p: &CMatrix, q: &CMatrix| commutator(p, q).unwrap();
        let jacobi = br(&a, &br(&b, &cc)) + br(&b, &br(&cc, &a)) + br(&cc, &br(&a, &b));
        assert!(max_abs(&jacobi) < 1e-12);
    }

    #[test]
    fn anticommutator_is_hermitian_sum() {
        let [x, _, z] = pauli();
        let ax = HermitianOperator::new(x).unwrap();
        let az = HermitianOperator::new(z).unwrap();
        assert!(anticommutator(&ax, &az).unwrap().max_norm() < 1e-15);
        let xx = anticommutator(&ax, &ax).unwrap();
        assert!(max_abs(&(xx.matrix() - CMatrix::identity(2, 2) * c(2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(DensityMatrix::from_populations(&[0.5, 0.6]), Err(FdtError::TraceViolation { .. })));
        assert!(matches!(DensityMatrix::from_populations(&[1.1, -0.1]), Err(FdtError::NotPositive { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_residual_bounded(seed in any::<u64>(), dim in 2usize..=16) {
            let mut rng = rng_from_seed(seed);
            let h = random_hermitian(&mut rng, dim, 3.0);
            let s = eig_hermitian(&h).unwrap();
            prop_assert!(max_abs(&(s.reconstruct() - h.matrix())) <= 1e-10 * h.max_norm());
            let g = s.eigenvectors.adjoint() * &s.eigenvectors;
            prop_assert!(max_abs(&(g - CMatrix::identity(dim, dim))) <= 1e-10);
            prop_assert!(s.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn self_correlation_nonnegative(seed in any::<u64>(), dim in 2usize..=8) {
            let mut rng = rng_from_seed(seed);
            let rho = random_density_matrix(&mut rng, dim);
            let x = random_hermitian(&mut rng, dim, 1.0);
            prop_assert!(symmetrized_correlation(&rho, &x, &x).unwrap() >= -1e-12);
        }

        #[test]
        fn thermal_populations_monotone(seed in any::<u64>(), dim in 2usize..=8, beta in 0.01f64..20.0) {
            let mut rng = rng_from_seed(seed);
            let h = random_hermitian(&mut rng, dim, 2.0);
            let (rho, _) = thermal_state(&h, beta).unwrap();
            let s = eig_hermitian(&h).unwrap();
            let pops = s.to_eigenbasis(rho.matrix());
            for n in 1..dim {
                prop_assert!(pops[(n, n)].re <= pops[(n - 1, n - 1)].re + 1e-14);
            }
            prop_assert!((rho.operator().trace() - 1.0).abs() <= TRACE_TOL);
            prop_assert!(DensityMatrix::new(rho.operator().clone()).is_ok());
        }
    }
}
