//! Gaussian fluctuations around the fixed point: the Ornstein-Uhlenbeck
//! process `dZ = K Z dt + dB` with independent coordinate noises of
//! variance `v~(k) = 2 beta (u~(k) - u~(k+1))` per unit time.

mod covariance;
mod sampler;
mod simulate;

pub use covariance::{lyapunov_residual, stationary_covariance, CovarianceMethod, StationaryCovariance};
pub use sampler::{gaussian_invariant_sampler, GaussianSampler};
pub use simulate::{simulate_ou, OuMethod, OuOptions, OuPath};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::ModelParams;

/// Noise variances `v~(1..=K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseVariances {
    values: Vec<f64>,
}

impl NoiseVariances {
    /// Wraps arbitrary nonnegative variances.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(crate::Error::InvalidArgument(format!(
                "noise variance {} is {}",
                i + 1,
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn level(&self) -> usize {
        self.values.len()
    }

    /// `v~(k)`, 1-based.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `v~(k) = 2 beta u~(k) (1 - rho^(L^k))`, evaluated through logs.
pub fn noise_variances(params: &ModelParams, level: usize) -> Result<NoiseVariances> {
    params.require_stable()?;
    let log_rho = params.rho().ln();
    let values = (1..=level)
        .map(|k| {
            let u = params.log_fixed_point(k).exp();
            2.0 * params.beta() * u * -(params.choices_pow(k) * log_rho).exp_m1()
        })
        .collect();
    Ok(NoiseVariances { values })
}
