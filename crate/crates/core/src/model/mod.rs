//! Mean-field model of `N` queues under join-the-shortest-of-`L` routing.
//!
//! States of the limit system are tail vectors `v(k)`, the fraction of queues
//! holding at least `k` customers. Everything here works on a finite
//! truncation `v(0..=K)` with the boundary convention `v(K+1) = 0`.

mod drift;
mod identities;
mod norms;
mod ode;

pub use drift::{
    drift, drift_finite_n, drift_minus, drift_plus, drift_plus_finite_n, falling_factorial,
    linearized_drift, lipschitz_bound, remainder_h,
};
pub use identities::{correction_a, correction_a_expanded, remainder_b, remainder_b_bound};
pub use norms::{tail_sums, telescoping_constant, weighted_norm, weighted_norm_squared};
pub use ode::{integrate_ode, OdeOptions, OdeTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold below which the fixed point is considered negligible when
/// picking a default truncation level.
pub const TRUNCATION_THRESHOLD: f64 = 1e-16;

/// Arrival rate per queue, service rate and number of sampled queues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    choices: usize,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, choices: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParams(format!("beta must be positive, got {beta}")));
        }
        if choices == 0 {
            return Err(Error::InvalidParams("choice count L must be at least 1".into()));
        }
        Ok(Self { alpha, beta, choices })
    }

    /// Parameters with service rate 1 and load `rho`.
    pub fn with_load(rho: f64, choices: usize) -> Result<Self> {
        Self::new(rho, 1.0, choices)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The choice count `L`.
    pub fn choices(&self) -> usize {
        self.choices
    }

    pub fn rho(&self) -> f64 {
        self.alpha / self.beta
    }

    /// Fails unless `rho < 1`.
    pub fn require_stable(&self) -> Result<()> {
        let rho = self.rho();
        if rho < 1.0 {
            Ok(())
        } else {
            Err(Error::Unstable { rho })
        }
    }

    /// Exponent `(L^k - 1)/(L - 1) = 1 + L + ... + L^(k-1)` of the fixed point.
    pub fn fixed_point_exponent(&self, k: usize) -> f64 {
        if self.choices == 1 {
            return k as f64;
        }
        let l = self.choices as f64;
        let mut term = 1.0;
        let mut sum = 0.0;
        for _ in 0..k {
            sum += term;
            term *= l;
        }
        sum
    }

    /// `ln u~(k)` for the fixed point `u~(k) = rho^((L^k - 1)/(L - 1))`.
    pub fn log_fixed_point(&self, k: usize) -> f64 {
        self.fixed_point_exponent(k) * self.rho().ln()
    }

    /// `L^k` as a float.
    pub(crate) fn choices_pow(&self, k: usize) -> f64 {
        (self.choices as f64).powi(k as i32)
    }

    /// Smallest `K >= 2` with `u~(K) < 1e-16`.
    pub fn default_truncation(&self) -> Result<usize> {
        self.require_stable()?;
        let target = TRUNCATION_THRESHOLD.ln();
        let mut k = 2;
        while self.log_fixed_point(k) >= target {
            k += 1;
        }
        Ok(k)
    }
}

/// A truncated point of the state space: `v(0) = 1 >= v(1) >= ... >= v(K) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailVector {
    values: Vec<f64>,
}

impl TailVector {
    /// Validates and wraps `v(0..=K)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Truncation { min: 1, got: values.len().saturating_sub(1) });
        }
        if values[0] != 1.0 {
            return Err(Error::InvalidTail(format!("v(0) must be 1, got {}", values[0])));
        }
        for k in 0..values.len() - 1 {
            if !(values[k + 1] <= values[k]) {
                return Err(Error::InvalidTail(format!(
                    "not nonincreasing at k = {k}: {} < {}",
                    values[k],
                    values[k + 1]
                )));
            }
        }
        let last = values[values.len() - 1];
        if !(last >= 0.0) {
            return Err(Error::InvalidTail(format!("v(K) must be nonnegative, got {last}")));
        }
        Ok(Self { values })
    }

    /// Builds the tail vector from `v(1..=K)`, prepending `v(0) = 1`.
    pub fn from_tail(tail: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(tail.len() + 1);
        values.push(1.0);
        values.extend_from_slice(tail);
        Self::new(values)
    }

    /// All queues holding at least `K` customers: `v = (1, ..., 1)`.
    pub fn full(level: usize) -> Result<Self> {
        Self::new(vec![1.0; level + 1])
    }

    /// All queues empty: `v = (1, 0, ..., 0)`.
    pub fn empty(level: usize) -> Result<Self> {
        let mut values = vec![0.0; level + 1];
        values[0] = 1.0;
        Self::new(values)
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self { values }
    }

    /// Truncation level `K`.
    pub fn level(&self) -> usize {
        self.values.len() - 1
    }

    /// `v(k)` for `0 <= k <= K`, and 0 beyond the truncation.
    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `v - w` on indices `1..=K`.
    pub fn centered_at(&self, center: &TailVector) -> Result<CenteredVector> {
        check_dims(center.level(), self.level())?;
        Ok(CenteredVector::new(
            (1..=self.level()).map(|k| self.values[k] - center.values[k]).collect(),
        ))
    }

    /// Adds a centered perturbation, validating the result.
    pub fn shifted(&self, x: &CenteredVector) -> Result<TailVector> {
        check_dims(self.level(), x.level())?;
        let mut values = self.values.clone();
        for k in 1..=self.level() {
            values[k] += x.get(k);
        }
        TailVector::new(values)
    }

    /// Termwise `self <= other`, with slack.
    pub fn dominated_by(&self, other: &TailVector, slack: f64) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| *a <= *b + slack)
    }
}

/// A signed sequence `x(1..=K)` with the implicit `x(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredVector {
    values: Vec<f64>,
}

impl CenteredVector {
    /// Wraps `x(1..=K)`; `values[0]` is `x(1)`.
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(level: usize) -> Self {
        Self { values: vec![0.0; level] }
    }

    /// The unit vector `e_k`, `1 <= k <= K`.
    pub fn unit(level: usize, k: usize) -> Self {
        let mut values = vec![0.0; level];
        values[k - 1] = 1.0;
        Self { values }
    }

    pub fn level(&self) -> usize {
        self.values.len()
    }

    /// `x(k)` with `x(0) = 0` and `x(k) = 0` beyond `K`.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Kind of a positive weight sequence used to define `L2(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    Geometric { theta: f64 },
    Potential,
}

/// Positive weights `w(1..=K)`; kept in log form as well since potential
/// coefficients underflow quickly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    kind: WeightKind,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl WeightSequence {
    /// `w(k) = theta^k`.
    pub fn geometric(theta: f64, level: usize) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidWeights(format!("theta must be positive, got {theta}")));
        }
        let weights = (1..=level).map(|k| theta.powi(k as i32)).collect();
        let log_weights = (1..=level).map(|k| k as f64 * theta.ln()).collect();
        Ok(Self { kind: WeightKind::Geometric { theta }, weights, log_weights })
    }

    /// Weights given by their logarithms, e.g. the potential coefficients.
    pub fn from_log_weights(kind: WeightKind, log_weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = log_weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidWeights(format!("weight {} is not positive", i + 1)));
        }
        let weights = log_weights.iter().map(|w| w.exp()).collect();
        Ok(Self { kind, weights, log_weights })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn level(&self) -> usize {
        self.weights.len()
    }

    /// `w(k)`, `1 <= k <= K`.
    pub fn get(&self, k: usize) -> f64 {
        self.weights[k - 1]
    }

    pub fn log_weight(&self, k: usize) -> f64 {
        self.log_weights[k - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// The unique stable point `u~(k) = rho^((L^k - 1)/(L - 1))`, truncated at `K`.
pub fn fixed_point(params: &ModelParams, level: usize) -> Result<TailVector> {
    params.require_stable()?;
    if level < 1 {
        return Err(Error::Truncation { min: 1, got: level });
    }
    let rho = params.rho();
    let values = (0..=level)
        .map(|k| {
            if params.choices() == 1 {
                rho.powi(k as i32)
            } else {
                // log-space exponent; powf underflows cleanly to 0
                rho.powf(params.fixed_point_exponent(k))
            }
        })
        .collect();
    Ok(TailVector::from_raw(values))
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_reject_bad_rates() {
        assert!(ModelParams::new(0.0, 1.0, 2).is_err());
        assert!(ModelParams::new(1.0, -1.0, 2).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1).unwrap().require_stable().is_err());
    }

    #[test]
    fn fixed_point_values() {
        let p = ModelParams::with_load(0.5, 1).unwrap();
        let u = fixed_point(&p, 3).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.5, 0.25, 0.125]);

        let p = ModelParams::with_load(0.5, 2).unwrap();
        let u = fixed_point(&p, 3).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.5, 0.125, 0.0078125]);

        for l in 1..=5 {
            for rho in [0.1, 0.5, 0.9, 0.99] {
                let p = ModelParams::new(rho * 3.0, 3.0, l).unwrap();
                assert_eq!(fixed_point(&p, 4).unwrap().get(1), p.rho());
            }
        }
    }

    #[test]
    fn fixed_point_rejects_unstable() {
        let p = ModelParams::new(2.0, 1.0, 2).unwrap();
        assert!(matches!(fixed_point(&p, 4), Err(Error::Unstable { .. })));
    }

    #[test]
    fn fixed_point_deep_levels_underflow_to_zero() {
        let p = ModelParams::with_load(0.9, 4).unwrap();
        let u = fixed_point(&p, 40).unwrap();
        assert_eq!(u.get(40), 0.0);
        assert!(TailVector::new(u.into_vec()).is_ok());
    }

    #[test]
    fn default_truncation_rule() {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        let k = p.default_truncation().unwrap();
        let u = fixed_point(&p, k).unwrap();
        assert!(u.get(k) < 1e-16);
        assert!(u.get(k - 1) >= 1e-16);
        assert_eq!(k, 9);
    }

    #[test]
    fn tail_vector_validation() {
        assert!(TailVector::new(vec![1.0]).is_err());
        assert!(TailVector::new(vec![0.9, 0.5]).is_err());
        assert!(TailVector::new(vec![1.0, 0.5, 0.6]).is_err());
        assert!(TailVector::new(vec![1.0, 0.5, -0.1]).is_err());
        assert!(TailVector::new(vec![1.0, 0.5, 0.5, 0.0]).is_ok());
    }

    #[test]
    fn geometric_weights_are_exact_powers() {
        let w = WeightSequence::geometric(0.5, 4).unwrap();
        assert_eq!(w.weights(), &[0.5, 0.25, 0.125, 0.0625]);
    }
}
