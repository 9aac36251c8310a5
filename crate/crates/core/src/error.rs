use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("load rho = {rho} is not below 1; the network has no equilibrium")]
    Unstable { rho: f64 },

    #[error("invalid tail vector: {0}")]
    InvalidTail(String),

    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("truncation level must be at least {min}, got {got}")]
    Truncation { min: usize, got: usize },

    #[error("state is not on the 1/N lattice: {0}")]
    NotOnLattice(String),

    #[error("step-size rejected at t = {time}: entry {index} reached {value}")]
    StepRejected { time: f64, index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive rate at index {index}: {value}")]
    NonPositiveRate { index: usize, value: f64 },

    #[error("zero bracketing lost a sign change at degree {degree}")]
    BracketLost { degree: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("stability guard violated: dt * |K| = {value} >= {limit}")]
    StabilityGuard { value: f64, limit: f64 },

    #[error("state space too large: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
