//! Numerical laboratory for `N` single-server queues fed by join-the-shortest-of-`L`
//! routing: the mean-field ODE and its fixed point, the linearized birth-death
//! operator and its spectral gap, the limiting stationary Ornstein-Uhlenbeck
//! process, and an exact event-driven simulator of the finite-`N` chain.

pub mod ctmc;
pub mod error;
pub mod model;
pub mod ou;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use model::{CenteredVector, ModelParams, TailVector, WeightSequence};
