//! Generalized fluctuation-dissipation relations for quantum Markov
//! systems, built on the symmetric logarithmic derivative (SLD).
//!
//! Conventions used throughout:
//!
//! * ħ = k_B = 1.
//! * A parameter λ enters as `H(λ) = H₀ − λA`; response functions are
//!   derivatives with respect to this λ.
//! * Operators are vectorized column by column.
//!
//! Modules:
//!
//! * [`operator_core`]: Hermitian operators, states, spectral tools.
//! * [`markov_maps`]: Kraus channels, Lindblad generators, fixed points, ξ₁ and π₁.
//! * [`sld_metrology`]: SLD solvers, quantum Fisher information, static susceptibilities.
//! * [`response`]: response functions via the SLD relation and reference routes.
//! * [`gaussian_lab`]: the two-oscillator, two-bath model in covariance-matrix
//!   and truncated-Fock form.

// `!(x > 0.0)` is the idiom for rejecting NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian_lab;
pub mod markov_maps;
pub mod operator_core;
pub mod random;
pub mod response;
pub mod sld_metrology;
mod sparse;

pub use error::{FdtError, Result};
pub use gaussian_lab::{GaussianSld, GaussianState, OscillatorParams, Quadratic, QuadraticObservable};
pub use markov_maps::{Channel, ChannelFamily, Dissipator, KrausChannel, LindbladGenerator, MarkovModel, Superoperator};
pub use num_complex::Complex64;
pub use operator_core::{CMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition};
pub use response::{DriveProtocol, ResponseSeries, SusceptibilitySpectrum, TimeGrid};
pub use sld_metrology::{SldResult, SusceptibilityDecomposition};
