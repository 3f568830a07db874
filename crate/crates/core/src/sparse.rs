//! Operator storage that switches to a coordinate list when a matrix is
//! mostly zeros, as ladder operators on a truncated Fock space are.

use num_complex::Complex64;

use crate::operator_core::CMatrix;

const SPARSE_MIN_DIM: usize = 16;

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Dense(CMatrix),
    Sparse { dim: usize, entries: Vec<(usize, usize, Complex64)> },
}

impl Op {
    pub(crate) fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        let entries: Vec<_> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter_map(|(i, j)| {
                let v = m[(i, j)];
                (v != Complex64::new(0.0, 0.0)).then_some((i, j, v))
            })
            .collect();
        if n >= SPARSE_MIN_DIM && entries.len() * 8 <= n * n {
            Op::Sparse { dim: n, entries }
        } else {
            Op::Dense(m.clone())
        }
    }

    pub(crate) fn adjoint(&self) -> Self {
        match self {
            Op::Dense(m) => Op::Dense(m.adjoint()),
            Op::Sparse { dim, entries } => {
                Op::Sparse { dim: *dim, entries: entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect() }
            }
        }
    }

    /// `out += alpha · self · x`
    pub(crate) fn left_acc(&self, alpha: Complex64, x: &CMatrix, out: &mut CMatrix) {
        match self {
            Op::Dense(m) => out.gemm(alpha, m, x, Complex64::new(1.0, 0.0)),
            Op::Sparse { dim, entries } => {
                let n = *dim;
                let xs = x.as_slice();
                let os = out.as_mut_slice();
                for &(i, j, v) in entries {
                    let av = alpha * v;
                    for c in 0..n {
                        os[i + c * n] += av * xs[j + c * n];
                    }
                }
            }
        }
    }

    /// `out += alpha · x · self`
    pub(crate) fn right_acc(&self, alpha: Complex64, x: &CMatrix, out: &mut CMatrix) {
        match self {
            Op::Dense(m) => out.gemm(alpha, x, m, Complex64::new(1.0, 0.0)),
            Op::Sparse { dim, entries } => {
                let n = *dim;
                let xs = x.as_slice();
                let os = out.as_mut_slice();
                for &(i, j, v) in entries {
                    let av = alpha * v;
                    let (src, dst) = (i * n, j * n);
                    for r in 0..n {
                        os[dst + r] += av * xs[src + r];
                    }
                }
            }
        }
    }

    pub(crate) fn left(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        self.left_acc(Complex64::new(1.0, 0.0), x, &mut out);
        out
    }

    /// Cheap upper bound on the operator 2-norm: `sqrt(‖M‖₁‖M‖_∞)`.
    pub(crate) fn norm_bound(&self) -> f64 {
        let (n, entries): (usize, Vec<(usize, usize, Complex64)>) = match self {
            Op::Dense(m) => {
                let n = m.nrows();
                (n, (0..n).flat_map(|j| (0..n).map(move |i| (i, j, m[(i, j)]))).collect())
            }
            Op::Sparse { dim, entries } => (*dim, entries.clone()),
        };
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for (i, j, v) in entries {
            rows[i] += v.norm();
            cols[j] += v.norm();
        }
        let r = rows.iter().cloned().fold(0.0, f64::max);
        let c = cols.iter().cloned().fold(0.0, f64::max);
        (r * c).sqrt()
    }
}
