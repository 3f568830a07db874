//! Symmetric logarithmic derivatives, quantum Fisher information and
//! static susceptibilities.
//!
//! The SLD Λ of a state ρ_λ solves `Λρ + ρΛ = 2∂_λρ`. In the eigenbasis of
//! ρ this reads `Λ_nm = 2(∂ρ)_nm / (p_n + p_m)`.

use num_complex::Complex64;

use crate::error::{FdtError, Result};
use crate::markov_maps::{invariant_state_derivative_solve, ChannelFamily};
use crate::operator_core::{
    check_dims, eig_hermitian, max_abs, thermal_populations, thermal_state_from_spectrum, trace_product, CMatrix, DensityMatrix,
    HermitianOperator, SpectralDecomposition,
};

/// Default support tolerance, relative to the largest eigenvalue of π₀.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Relative threshold below which two energies count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// SLD together with its residual diagnostics.
#[derive(Clone, Debug)]
pub struct SldResult {
    pub lambda_op: HermitianOperator,
    /// `‖Λπ + πΛ − 2∂ρ‖_max / ‖∂ρ‖_max`, zero when ∂ρ vanishes.
    pub residual: f64,
    /// Number of eigenvalues of π₀ above the support threshold.
    pub support_rank: usize,
}

/// Curie (population) and van Vleck (coherence) parts of a thermal
/// static susceptibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SusceptibilityDecomposition {
    pub curie: f64,
    pub van_vleck: f64,
    pub total: f64,
}

fn lyapunov_residual(pi: &CMatrix, lambda: &CMatrix, d_rho: &CMatrix) -> f64 {
    let two = Complex64::new(2.0, 0.0);
    let r = lambda * pi + pi * lambda - d_rho * two;
    let scale = max_abs(d_rho);
    if scale == 0.0 {
        max_abs(&r)
    } else {
        max_abs(&r) / scale
    }
}

/// Solves `Λπ₀ + π₀Λ = 2∂ρ` in the eigenbasis of π₀.
///
/// Matrix elements between eigenvectors whose populations sum to less than
/// `support_tol·p_max` are set to zero, provided ∂ρ has no weight there.
pub fn sld_from_state_derivative(pi0: &DensityMatrix, d_rho: &HermitianOperator, support_tol: f64) -> Result<SldResult> {
    check_dims(pi0.dim(), d_rho.dim())?;
    let trace = d_rho.trace();
    if trace.abs() > 1e-8 {
        return Err(FdtError::NotTraceless { trace });
    }
    let spec = eig_hermitian(pi0.operator())?;
    let n = spec.dim();
    let p = spec.eigenvalues.as_slice();
    let p_max = p[n - 1];
    let threshold = support_tol * p_max;
    let weight_tol = threshold.max(support_tol * d_rho.max_norm());
    let d = spec.to_eigenbasis(d_rho.matrix());
    let mut lam = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let s = p[i] + p[j];
            if s < threshold {
                let weight = d[(i, j)].norm();
                if weight >= weight_tol {
                    return Err(FdtError::SupportViolation { weight });
                }
            } else {
                lam[(i, j)] = d[(i, j)] * (2.0 / s);
            }
        }
    }
    let lambda_op = HermitianOperator::from_hermitian_part(&spec.from_eigenbasis(&lam));
    let residual = lyapunov_residual(pi0.matrix(), lambda_op.matrix(), d_rho.matrix());
    let support_rank = p.iter().filter(|&&x| x > threshold).count();
    Ok(SldResult { lambda_op, residual, support_rank })
}

/// Energy eigenbasis of H₀ in which A is diagonal inside every degenerate
/// eigenspace, with A and the populations expressed in it.
struct ThermalBasis {
    energies: Vec<f64>,
    populations: Vec<f64>,
    /// Columns are the adapted eigenvectors.
    basis: SpectralDecomposition,
    /// A in the adapted basis.
    a: CMatrix,
    /// Block label of each level.
    block: Vec<usize>,
    mean_a: f64,
    beta: f64,
}

impl ThermalBasis {
    fn new(h0: &HermitianOperator, a: &HermitianOperator, beta: f64) -> Result<Self> {
        check_dims(h0.dim(), a.dim())?;
        let mut spec = eig_hermitian(h0)?;
        let energies: Vec<f64> = spec.eigenvalues.iter().cloned().collect();
        let n = energies.len();
        let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let tol = DEGENERACY_TOL * scale;
        let mut block = vec![0usize; n];
        for k in 1..n {
            block[k] = if energies[k] - energies[k - 1] <= tol { block[k - 1] } else { block[k - 1] + 1 };
        }
        let mut a_rot = spec.to_eigenbasis(a.matrix());
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && block[end] == block[start] {
                end += 1;
            }
            if end - start > 1 {
                let size = end - start;
                let sub = a_rot.view((start, start), (size, size)).into_owned();
                let u = eig_hermitian(&HermitianOperator::from_hermitian_part(&sub))?.eigenvectors;
                // The rotation acts only on this block's columns and rows.
                let cols = spec.eigenvectors.columns(start, size) * &u;
                spec.eigenvectors.columns_mut(start, size).copy_from(&cols);
                let cols = a_rot.columns(start, size) * &u;
                a_rot.columns_mut(start, size).copy_from(&cols);
                let rows = u.adjoint() * a_rot.rows(start, size);
                a_rot.rows_mut(start, size).copy_from(&rows);
            }
            start = end;
        }
        let populations = thermal_populations(&energies, beta)?;
        let mean_a = (0..n).map(|k| populations[k] * a_rot[(k, k)].re).sum();
        Ok(Self { energies, populations, basis: spec, a: a_rot, block, mean_a, beta })
    }

    fn degenerate(&self, i: usize, j: usize) -> bool {
        self.block[i] == self.block[j]
    }

    /// `tanh(β(E_i−E_j)/2)/(E_i−E_j) = (p_j−p_i)/((E_i−E_j)(p_i+p_j))`, a
    /// form that survives underflow of either population.
    fn kernel(&self, i: usize, j: usize) -> f64 {
        let de = self.energies[i] - self.energies[j];
        (0.5 * self.beta * de).tanh() / de
    }

    /// `∂_λρ_λ` at λ = 0 in the adapted basis.
    fn state_derivative(&self) -> CMatrix {
        let n = self.energies.len();
        CMatrix::from_fn(n, n, |i, j| {
            if self.degenerate(i, j) {
                if i == j {
                    Complex64::new(self.beta * self.populations[i] * (self.a[(i, i)].re - self.mean_a), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else {
                let s = self.populations[i] + self.populations[j];
                self.a[(i, j)] * (s * self.kernel(i, j))
            }
        })
    }

    fn sld(&self) -> CMatrix {
        let n = self.energies.len();
        CMatrix::from_fn(n, n, |i, j| {
            if self.degenerate(i, j) {
                if i == j {
                    Complex64::new(self.beta * (self.a[(i, i)].re - self.mean_a), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else {
                self.a[(i, j)] * (2.0 * self.kernel(i, j))
            }
        })
    }
}

/// Derivative of the Gibbs state `e^{−β(H₀−λA)}/Z` at λ = 0.
pub fn thermal_state_derivative(h0: &HermitianOperator, a: &HermitianOperator, beta: f64) -> Result<HermitianOperator> {
    let tb = ThermalBasis::new(h0, a, beta)?;
    Ok(HermitianOperator::from_hermitian_part(&tb.basis.from_eigenbasis(&tb.state_derivative())))
}

/// Closed-form SLD of the Gibbs family at λ = 0.
///
/// Off-degenerate elements are `2A_nm(p_m−p_n)/((E_n−E_m)(p_n+p_m))`;
/// within a degenerate eigenspace of H₀ the basis is chosen to diagonalize
/// A there and `Λ_nn = β(A_nn − ⟨A⟩)`.
pub fn sld_thermal(h0: &HermitianOperator, a: &HermitianOperator, beta: f64) -> Result<SldResult> {
    let tb = ThermalBasis::new(h0, a, beta)?;
    let lambda_op = HermitianOperator::from_hermitian_part(&tb.basis.from_eigenbasis(&tb.sld()));
    let d_rho = tb.basis.from_eigenbasis(&tb.state_derivative());
    let (pi, _) = thermal_state_from_spectrum(&tb.basis, beta)?;
    let residual = lyapunov_residual(pi.matrix(), lambda_op.matrix(), &d_rho);
    Ok(SldResult { lambda_op, residual, support_rank: h0.dim() })
}

/// SLD of a channel family at λ₀, with π₁ from the linear-response solve.
pub fn sld_for_family(family: &ChannelFamily, h: f64) -> Result<(DensityMatrix, SldResult)> {
    let pi0 = family.reference()?.fixed_point()?;
    let pi1 = invariant_state_derivative_solve(family, h)?;
    let sld = sld_from_state_derivative(&pi0, &pi1, SUPPORT_TOL)?;
    Ok((pi0, sld))
}

/// `𝓕 = Tr[Λ²π]`.
pub fn qfi(pi0: &DensityMatrix, sld: &SldResult) -> Result<f64> {
    check_dims(pi0.dim(), sld.lambda_op.dim())?;
    let l = sld.lambda_op.matrix();
    let lp = l * pi0.matrix();
    Ok(trace_product(&lp, l).re.max(0.0))
}

/// `χ^s_B = ½⟨BΛ₀ + Λ₀B⟩₀`.
pub fn static_susceptibility(pi0: &DensityMatrix, sld: &SldResult, b: &HermitianOperator) -> Result<f64> {
    check_dims(pi0.dim(), b.dim())?;
    check_dims(pi0.dim(), sld.lambda_op.dim())?;
    let pb = pi0.matrix() * b.matrix();
    Ok(trace_product(&pb, sld.lambda_op.matrix()).re)
}

/// Static susceptibility of A itself, split into Curie and van Vleck terms.
pub fn thermal_susceptibility_decomposed(
    h0: &HermitianOperator,
    a: &HermitianOperator,
    beta: f64,
) -> Result<SusceptibilityDecomposition> {
    let tb = ThermalBasis::new(h0, a, beta)?;
    let n = tb.energies.len();
    let p = &tb.populations;
    let diag: f64 = (0..n).map(|k| p[k] * tb.a[(k, k)].norm_sqr()).sum();
    let curie = beta * (diag - tb.mean_a * tb.mean_a);
    let mut van_vleck = 0.0;
    for i in 0..n {
        for j in 0..n {
            if !tb.degenerate(i, j) {
                van_vleck += (p[i] + p[j]) * tb.kernel(i, j) * tb.a[(i, j)].norm_sqr();
            }
        }
    }
    Ok(SusceptibilityDecomposition { curie, van_vleck, total: curie + van_vleck })
}

/// Thermal QFI `Tr[Λ₀²π₀]` from [`sld_thermal`].
pub fn thermal_qfi(h0: &HermitianOperator, a: &HermitianOperator, beta: f64) -> Result<f64> {
    let sld = sld_thermal(h0, a, beta)?;
    let (pi, _) = crate::operator_core::thermal_state(h0, beta)?;
    qfi(&pi, &sld)
}

/// Prefactor of the population term in [`thermal_qfi_expanded`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagonalPrefactor {
    /// β, which misses `Tr[Λ₀²π₀]` whenever the diagonal block is nonzero and β ≠ 1.
    Beta,
    /// β², which follows from `Λ_nn = β(A_nn − ⟨A⟩)`.
    BetaSquared,
}

/// Expanded thermal QFI
/// `c·[Σ p_n|A_nn|² − ⟨A⟩²] + 2Σ_{E_n≠E_m} ((p_m−p_n)/(E_n−E_m))² |A_nm|²/(p_n+p_m)`
/// with `c` selected by `prefactor`. Only the β² choice equals
/// [`thermal_qfi`]; the other is kept to document the discrepancy.
pub fn thermal_qfi_expanded(
    h0: &HermitianOperator,
    a: &HermitianOperator,
    beta: f64,
    prefactor: DiagonalPrefactor,
) -> Result<f64> {
    let tb = ThermalBasis::new(h0, a, beta)?;
    let n = tb.energies.len();
    let p = &tb.populations;
    let diag: f64 = (0..n).map(|k| p[k] * tb.a[(k, k)].norm_sqr()).sum::<f64>() - tb.mean_a * tb.mean_a;
    let c = match prefactor {
        DiagonalPrefactor::Beta => beta,
        DiagonalPrefactor::BetaSquared => beta * beta,
    };
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            if !tb.degenerate(i, j) {
                let s = p[i] + p[j];
                let k = s * tb.kernel(i, j);
                off += 2.0 * k * k * tb.a[(i, j)].norm_sqr() / s;
            }
        }
    }
    Ok(c * diag + off)
}

/// `C(δ) = tanh(δ/2T)/(δ/2T)`, with the series `1 − x²/3 + 2x⁴/15` near
/// `x = δ/2T = 0` so that `C(0) = 1` exactly.
pub fn detuning_factor(delta: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(FdtError::invalid("T", format!("must be positive, got {temperature}")));
    }
    let x = delta / (2.0 * temperature);
    if x.abs() < 1e-4 {
        let x2 = x * x;
        Ok(1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0)
    } else {
        Ok(x.tanh() / x)
    }
}
