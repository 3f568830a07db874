use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdtError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty operator (dimension 0)")]
    EmptyOperator,
    #[error("matrix is not Hermitian: max |M - M^H| = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("trace {trace} differs from 1 beyond {tolerance:e}")]
    TraceViolation { trace: f64, tolerance: f64 },
    #[error("state is not positive: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("channel is not trace preserving: max |sum K^H K - I| = {deviation:e}")]
    NotTracePreserving { deviation: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("fixed-point space is degenerate (multiplicity {multiplicity})")]
    DegenerateFixedPoint { multiplicity: usize },
    #[error("state is not invariant: residual {residual:e} exceeds {tolerance:e}")]
    NotInvariant { residual: f64, tolerance: f64 },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("positivity lost at t = {time}: minimum eigenvalue {min_eigenvalue:e}")]
    PositivityBreach { time: f64, min_eigenvalue: f64 },
    #[error("time step {dt} exceeds the integrator stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("derivative has weight {weight:e} outside the support of the state")]
    SupportViolation { weight: f64 },
    #[error("derivative is not traceless: trace {trace:e}")]
    NotTraceless { trace: f64 },
    #[error("linear system is singular: {0}")]
    Singular(&'static str),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("the two routes for {quantity} disagree by {difference:e} (tolerance {tolerance:e})")]
    RouteDisagreement { quantity: &'static str, difference: f64, tolerance: f64 },
    #[error("series has not decayed: tail {tail:e} relative to peak; supply damping")]
    NotDecayed { tail: f64 },
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
    #[error("variance must be positive, got {0:e}")]
    ZeroVariance(f64),
    #[error("Gaussian state has nonzero mean (max |mean| = {0:e})")]
    NonzeroMean(f64),
    #[error("unequal bath temperatures T1 = {t1}, T2 = {t2}")]
    UnequalTemperatures { t1: f64, t2: f64 },
    #[error("unsupported observable `{0}`")]
    UnsupportedObservable(String),
    #[error("covariance matrix violates the uncertainty relation (min eigenvalue {0:e})")]
    Uncertainty(f64),
    #[error("result should be real but has imaginary part {0:e}")]
    ComplexResidue(f64),
    #[error("Fock truncation leaks {leakage:e} of mode {mode}'s population into the top two levels")]
    TruncationLeakage { mode: usize, leakage: f64 },
    #[error("eigen-solver failed to converge")]
    EigenFailure,
}

impl FdtError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        FdtError::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, FdtError>;
