//! The linearization `K` of the mean-field drift at its fixed point.
//!
//! `K` is tridiagonal and is the transpose of the generator of a killed
//! birth-death process with births `lambda_k = beta L rho^(L^k)` and deaths
//! `mu_k = beta`. The submodules cover its potential coefficients, the
//! associated orthogonal polynomials, the spectral gap, the semigroup
//! `e^{Kt}` and decay checks for the linear and nonlinear flows.

mod expm;
mod gap;
mod operator;
mod polynomials;
mod potential;
mod report;
mod stability;

pub use expm::{exponential_matrix, matrix_exponential_action, Propagator};
pub use gap::{gap_of_operator, smallest_symmetrized_eigenvalue, spectral_gap, DegreeZeros, SpectralGapEstimate};
pub use operator::{build_operator, TridiagonalOperator};
pub use polynomials::{evaluate_polynomials, PolynomialSystem, PolynomialValues};
pub use potential::{check_self_adjoint, potential_coefficients, PotentialCoefficients};
pub use report::{spectral_report, SpectralReport};
pub use stability::{
    exponential_stability_check, fit_decay, DecayFit, FlowKind, StabilityOptions, StabilityReport,
    StabilityTrial,
};
