//! Seeded random operators, states, channels and generators for the
//! randomized validation suites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::markov_maps::{ChannelFamily, Dissipator, LindbladGenerator};
use crate::operator_core::{CMatrix, DensityMatrix, HermitianOperator};

/// Generator used by every randomized routine in the crate.
pub type FdtRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> FdtRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

/// Hermitian matrix from the Gaussian unitary ensemble, spectrum of
/// order `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> HermitianOperator {
    let g = ginibre(rng, dim, dim);
    let h = (&g + g.adjoint()) * Complex64::new(0.5 * scale / (dim as f64).sqrt(), 0.0);
    HermitianOperator::new(h).expect("Hermitian by construction")
}

/// Random traceless Hermitian matrix.
pub fn random_traceless_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> HermitianOperator {
    let h = random_hermitian(rng, dim, scale);
    let t = h.trace() / dim as f64;
    h.shift(t)
}

/// Full-rank state `W/Tr W` with `W = GG^H` (Hilbert–Schmidt measure).
pub fn random_density_matrix<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, dim);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    DensityMatrix::from_matrix(w * Complex64::new(1.0 / tr, 0.0)).expect("valid state by construction")
}

/// Haar-random unitary via QR with phase correction.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let qr = ginibre(rng, dim, dim).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for x in q.column_mut(j).iter_mut() {
            *x *= phase;
        }
    }
    q
}

/// Kraus family `K_j(λ) = ⟨j|e^{−i(G₀+λG₁)}|0⟩` from a random system-environment
/// unitary with `n_kraus` environment levels. Generic draws are primitive.
pub fn random_stinespring_family<R: Rng>(rng: &mut R, dim: usize, n_kraus: usize) -> ChannelFamily {
    let total = dim * n_kraus;
    let g0 = random_hermitian(rng, total, 2.0);
    let g1 = random_hermitian(rng, total, 1.0);
    ChannelFamily::stinespring(g0, g1, dim).expect("consistent dimensions")
}

/// Random Lindblad generator with `n_jumps` Ginibre jump operators.
pub fn random_lindblad_generator<R: Rng>(rng: &mut R, dim: usize, n_jumps: usize) -> LindbladGenerator {
    let h = random_hermitian(rng, dim, 1.0);
    let dissipators = (0..n_jumps)
        .map(|_| {
            let l = ginibre(rng, dim, dim) * Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
            let rate = rng.random_range(0.2..1.0);
            Dissipator::new(l, rate).expect("nonnegative rate")
        })
        .collect();
    LindbladGenerator::new(h, dissipators).expect("consistent dimensions")
}
