//! The two-oscillator model on a truncated Fock basis `{|n₁, n₂⟩ : n_i ≤ n_max}`.
//!
//! Basis index `n₁·(n_max+1) + n₂`. In the rotating frame the common
//! frequency ω(n₁ + n₂) is dropped; it commutes with the coupling, the
//! dissipators and π₀, so quadratic expectation values coincide with the
//! lab frame whenever the state is phase invariant, as every state reached
//! from π₀ here is.

use num_complex::Complex64;

use super::{OscillatorParams, QuadraticObservable};
use crate::error::{FdtError, Result};
use crate::markov_maps::{Dissipator, LindbladGenerator};
use crate::operator_core::{matrix_exponential_action, trace_product, CMatrix, DensityMatrix, ExpMode, HermitianOperator};
use crate::response::{ResponseSeries, TimeGrid};

/// Truncation leakage above which a warning is logged.
pub const LEAKAGE_WARN: f64 = 1e-4;
/// Truncation leakage treated as a numerical failure.
pub const LEAKAGE_FAIL: f64 = 1e-2;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Ladder, number and quadrature operators on the product space.
#[derive(Clone, Debug)]
pub struct FockOperators {
    pub n_max: usize,
    pub a1: CMatrix,
    pub a2: CMatrix,
    pub n1: CMatrix,
    pub n2: CMatrix,
    /// `a₁†a₂ + a₂†a₁`
    pub hopping: CMatrix,
    /// `(x₁, x₂, p₁, p₂)`
    pub quadratures: [CMatrix; 4],
}

impl FockOperators {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(FdtError::invalid("n_max", format!("must be at least 2, got {n_max}")));
        }
        let levels = n_max + 1;
        let mut a = CMatrix::zeros(levels, levels);
        for n in 1..levels {
            a[(n - 1, n)] = real((n as f64).sqrt());
        }
        let id = CMatrix::identity(levels, levels);
        let a1 = a.kronecker(&id);
        let a2 = id.kronecker(&a);
        let n1 = a1.adjoint() * &a1;
        let n2 = a2.adjoint() * &a2;
        let hop = a1.adjoint() * &a2;
        let hopping = &hop + hop.adjoint();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = |b: &CMatrix| (b.adjoint() + b) * real(s);
        let p = |b: &CMatrix| (b.adjoint() - b) * Complex64::new(0.0, s);
        let quadratures = [x(&a1), x(&a2), p(&a1), p(&a2)];
        Ok(Self { n_max, a1, a2, n1, n2, hopping, quadratures })
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    /// `½Σ Q_jk(R_jR_k + R_kR_j) + offset` as a matrix.
    pub fn observable(&self, q: &QuadraticObservable) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::identity(d, d) * real(q.offset);
        for j in 0..4 {
            for k in 0..4 {
                let c = q.coeffs[(j, k)];
                if c != 0.0 {
                    let rr = &self.quadratures[j] * &self.quadratures[k];
                    out += (&rr + rr.adjoint()) * real(0.5 * c);
                }
            }
        }
        out
    }
}

/// Which Hamiltonian the generator carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FockFrame {
    /// `ω₁n₁ + ω₂n₂ − J·A`
    Lab,
    /// `δn₂ − J·A`
    #[default]
    Rotating,
}

/// Truncated model with its generator and reference state.
#[derive(Clone, Debug)]
pub struct FockModel {
    pub params: OscillatorParams,
    pub frame: FockFrame,
    pub ops: FockOperators,
    pub generator: LindbladGenerator,
    /// Product of the truncated thermal states of the two modes.
    pub pi0: DensityMatrix,
    /// Population of the top two Fock levels of each mode under π₀.
    pub leakage: [f64; 2],
}

fn truncated_thermal(omega: f64, temperature: f64, n_max: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..=n_max).map(|n| (-(n as f64) * omega / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Builds the truncated model at the coupling stored in `params`.
pub fn build_fock_model(params: &OscillatorParams, n_max: usize, frame: FockFrame) -> Result<FockModel> {
    params.validate()?;
    let ops = FockOperators::new(n_max)?;
    let h = match frame {
        FockFrame::Lab => &ops.n1 * real(params.omega1()) + &ops.n2 * real(params.omega2()),
        FockFrame::Rotating => &ops.n2 * real(params.delta),
    } - &ops.hopping * real(params.coupling);
    let mut dissipators = Vec::new();
    for (a, n) in [(&ops.a1, params.n1()), (&ops.a2, params.n2())] {
        dissipators.push(Dissipator::new(a.clone(), params.gamma * (n + 1.0))?);
        if n > 0.0 {
            dissipators.push(Dissipator::new(a.adjoint(), params.gamma * n)?);
        }
    }
    let generator = LindbladGenerator::new(HermitianOperator::new(h)?, dissipators)?;
    let p1 = truncated_thermal(params.omega1(), params.t1, n_max);
    let p2 = truncated_thermal(params.omega2(), params.t2, n_max);
    let joint: Vec<f64> = p1.iter().flat_map(|a| p2.iter().map(move |b| a * b)).collect();
    let pi0 = DensityMatrix::from_populations(&joint)?;
    let leakage = [p1[n_max] + p1[n_max - 1], p2[n_max] + p2[n_max - 1]];
    Ok(FockModel { params: *params, frame, ops, generator, pi0, leakage })
}

impl FockModel {
    /// Logs leakage above [`LEAKAGE_WARN`]; fails above [`LEAKAGE_FAIL`].
    pub fn check_leakage(&self) -> Result<()> {
        for (mode, &leakage) in self.leakage.iter().enumerate() {
            if leakage > LEAKAGE_FAIL {
                return Err(FdtError::TruncationLeakage { mode: mode + 1, leakage });
            }
            if leakage > LEAKAGE_WARN {
                log::warn!(
                    "Fock truncation n_max = {} leaves {leakage:.3e} of mode {}'s population in the top two levels",
                    self.ops.n_max,
                    mode + 1
                );
            }
        }
        Ok(())
    }

    pub fn observable(&self, q: &QuadraticObservable) -> CMatrix {
        self.ops.observable(q)
    }
}

/// Response of ⟨B⟩ to an impulsive coupling `J(t) = εδ(t)` on the
/// truncated model at J = 0: π₀ is rotated by `e^{±iεA}`, propagated with
/// RK4 steps of `grid.dt`, and the two signs are central-differenced.
/// Returns the series and the model's leakage.
pub fn fock_kick_response(
    params: &OscillatorParams,
    obs: &QuadraticObservable,
    n_max: usize,
    grid: TimeGrid,
    eps: f64,
) -> Result<(ResponseSeries, [f64; 2])> {
    if params.coupling != 0.0 {
        return Err(FdtError::invalid("J", "the kick response is taken around J = 0"));
    }
    if !(eps > 0.0) {
        return Err(FdtError::invalid("eps", format!("must be positive, got {eps}")));
    }
    let model = build_fock_model(params, n_max, FockFrame::Rotating)?;
    model.check_leakage()?;
    let a = HermitianOperator::new(model.ops.hopping.clone())?;
    let kicked = |sign: f64| -> Result<CMatrix> {
        // e^{iεA} is the evolution under −εδ(t)·(−A).
        let u = matrix_exponential_action(&a, -sign * eps, ExpMode::Unitary)?;
        Ok(&u * model.pi0.matrix() * u.adjoint())
    };
    let mut x = (kicked(1.0)? - kicked(-1.0)?) * real(0.5 / eps);
    let b = model.observable(obs);
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        if k > 0 {
            x = model.generator.evolve_matrix(&x, grid.dt, grid.dt)?;
        }
        out.push(trace_product(&b, &x).re);
    }
    Ok((ResponseSeries::new(0.0, grid.dt, out)?, model.leakage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_lab::{
        gaussian_sld, quadrature_evolution, response_analytic, wick_correlation, GaussianState, Quadratic,
    };
    use crate::markov_maps::stationary_state;
    use crate::operator_core::{expectation, max_abs};

    fn cold() -> OscillatorParams {
        OscillatorParams { omega: 1.0, delta: 0.3, coupling: 0.0, gamma: 0.2, t1: 0.4, t2: 0.6 }
    }

    #[test]
    fn rejects_tiny_truncation() {
        assert!(FockOperators::new(1).is_err());
    }

    #[test]
    fn operators_satisfy_canonical_relations_below_the_cutoff() {
        let ops = FockOperators::new(5).unwrap();
        let [x1, _, p1, p2] = &ops.quadratures;
        let c = x1 * p1 - p1 * x1;
        // [x, p] = i except on the top level of mode 1.
        for i in 0..ops.dim() {
            if i / 6 < 5 {
                assert!((c[(i, i)] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
            }
        }
        assert!(max_abs(&(x1 * p2 - p2 * x1)) < 1e-12);
        let a = &ops.hopping;
        let alt = (&ops.quadratures[0] * &ops.quadratures[1]) + (&ops.quadratures[2] * &ops.quadratures[3]);
        assert!(max_abs(&(a - alt)) < 1e-12);
    }

    #[test]
    fn uncoupled_fixed_point_is_the_product_thermal_state() {
        let p = cold();
        for frame in [FockFrame::Lab, FockFrame::Rotating] {
            let model = build_fock_model(&p, 6, frame).unwrap();
            assert!(max_abs(&model.generator.apply(model.pi0.matrix())) < 1e-12);
        }
        let model = build_fock_model(&p, 4, FockFrame::Rotating).unwrap();
        let pi = stationary_state(&model.generator).unwrap();
        assert!(max_abs(&(pi.matrix() - model.pi0.matrix())) < 1e-8);
    }

    #[test]
    fn occupation_matches_bose() {
        let p = OscillatorParams { t1: 1.0, ..cold() };
        let model = build_fock_model(&p, 30, FockFrame::Rotating).unwrap();
        let n1 = expectation(&model.pi0, &HermitianOperator::new(model.ops.n1.clone()).unwrap()).unwrap();
        assert!((n1 - 0.5819767068693265).abs() < 1e-6);
    }

    #[test]
    fn leakage_policy() {
        let p = OscillatorParams::default();
        let model = build_fock_model(&p, 15, FockFrame::Rotating).unwrap();
        assert!(model.leakage[0] < LEAKAGE_WARN);
        assert!(model.leakage[1] > LEAKAGE_WARN && model.leakage[1] < LEAKAGE_FAIL);
        assert!(model.check_leakage().is_ok());
        let coarse = build_fock_model(&p, 3, FockFrame::Rotating).unwrap();
        assert!(matches!(coarse.check_leakage(), Err(FdtError::TruncationLeakage { .. })));
    }

    #[test]
    fn wick_matches_dense_traces() {
        let p = cold();
        let model = build_fock_model(&p, 14, FockFrame::Lab).unwrap();
        let pi0 = GaussianState::reference(&p).unwrap();
        let sld = gaussian_sld(&p).unwrap();
        let mut obs: Vec<QuadraticObservable> = Quadratic::ALL.iter().map(|q| q.observable()).collect();
        obs.push(sld.observable().clone());
        for q1 in &obs {
            let m1 = HermitianOperator::new(model.observable(q1)).unwrap();
            for q2 in &obs {
                let m2 = HermitianOperator::new(model.observable(q2)).unwrap();
                let dense = crate::operator_core::symmetrized_correlation(&model.pi0, &m1, &m2).unwrap();
                let gauss = wick_correlation(&pi0, q1, q2).unwrap();
                assert!((dense - gauss).abs() < 1e-6, "{dense} vs {gauss}");
            }
        }
    }

    #[test]
    fn heisenberg_table_matches_dense_evolution() {
        let p = cold();
        let model = build_fock_model(&p, 12, FockFrame::Lab).unwrap();
        let x1x2 = Quadratic::X1X2.observable();
        let t = 1.3;
        let b = model.generator.evolve_observable(&model.observable(&x1x2), t, 0.01).unwrap();
        let closed = model.observable(&quadrature_evolution(&x1x2, t, &p).unwrap());
        // Compare expectation values on a low-occupation state, away from the cutoff.
        let rho = DensityMatrix::from_populations(
            &(0..model.ops.dim()).map(|i| if i == 0 || i == 14 { 0.5 } else { 0.0 }).collect::<Vec<_>>(),
        )
        .unwrap();
        let psi = {
            // Superposition of |0,0⟩, |0,1⟩, |1,0⟩ so x₁x₂ has a nonzero mean.
            let mut v = CMatrix::zeros(model.ops.dim(), 1);
            v[(0, 0)] = real(0.6);
            v[(1, 0)] = real(0.48);
            v[(13, 0)] = Complex64::new(0.0, 0.64);
            &v * v.adjoint()
        };
        for state in [rho.matrix().clone(), psi] {
            let lhs = trace_product(&b, &state).re;
            let rhs = trace_product(&closed, &state).re;
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn kick_response_matches_analytic_at_low_temperature() {
        let p = cold();
        let grid = TimeGrid::new(0.05, 200).unwrap();
        for q in [Quadratic::X1X2, Quadratic::X1P2, Quadratic::X1Sq] {
            let (phi, _) = fock_kick_response(&p, &q.observable(), 10, grid, 1e-4).unwrap();
            for k in 0..grid.len() {
                let exact = response_analytic(q, grid.time(k), &p).unwrap();
                assert!((phi.values()[k] - exact).abs() < 1e-6, "{q} at t = {}", grid.time(k));
            }
        }
    }
}
