use serde::{Deserialize, Serialize};

use super::TridiagonalOperator;
use crate::error::{Error, Result};
use crate::model::{check_dims, WeightKind, WeightSequence};

/// Potential coefficients `pi(1..=K)` with `pi(1) = 1`, solving detailed
/// balance `mu_{k+1} pi(k+1) = lambda_k pi(k)`. Stored in log form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCoefficients {
    log_pi: Vec<f64>,
}

impl PotentialCoefficients {
    pub fn dim(&self) -> usize {
        self.log_pi.len()
    }

    /// `pi(k)`; underflows to 0 for deep states.
    pub fn get(&self, k: usize) -> f64 {
        self.log_pi[k - 1].exp()
    }

    pub fn log(&self, k: usize) -> f64 {
        self.log_pi[k - 1]
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_pi.iter().map(|x| x.exp()).collect()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_pi
    }

    /// The weight sequence defining `L2(pi)`.
    pub fn to_weights(&self) -> Result<WeightSequence> {
        WeightSequence::from_log_weights(WeightKind::Potential, self.log_pi.clone())
    }

    /// Worst relative detailed-balance defect `|1 - sup(k) pi(k+1) / (sub(k) pi(k))|`.
    pub fn detailed_balance_residual(&self, op: &TridiagonalOperator) -> f64 {
        (1..op.dim())
            .map(|k| {
                let lhs = op.sup(k).ln() + self.log(k + 1);
                let rhs = op.log_sub(k) + self.log(k);
                (lhs - rhs).exp_m1().abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves detailed balance in log space.
pub fn potential_coefficients(op: &TridiagonalOperator) -> Result<PotentialCoefficients> {
    let mut log_pi = Vec::with_capacity(op.dim());
    log_pi.push(0.0);
    for k in 1..op.dim() {
        let birth = op.log_sub(k);
        if !birth.is_finite() {
            return Err(Error::NonPositiveRate { index: k, value: op.sub(k) });
        }
        let death = op.sup(k);
        if !(death > 0.0) {
            return Err(Error::NonPositiveRate { index: k + 1, value: death });
        }
        let prev = log_pi[k - 1];
        log_pi.push(prev + birth - death.ln());
    }
    Ok(PotentialCoefficients { log_pi })
}

/// Largest asymmetry `|S - S^T|` of `S = diag(pi)^(-1/2) K diag(pi)^(1/2)`,
/// which is symmetric exactly when `diag(pi)^-1 K` is, i.e. when `K` is
/// self-adjoint in `L2(pi)`.
pub fn check_self_adjoint(op: &TridiagonalOperator, pi: &PotentialCoefficients) -> Result<f64> {
    check_dims(op.dim(), pi.dim())?;
    let mut worst = 0.0f64;
    for k in 1..op.dim() {
        let half = 0.5 * (pi.log(k + 1) - pi.log(k));
        let lower = (op.log_sub(k) - half).exp();
        let upper = op.sup(k) * half.exp();
        worst = worst.max((lower - upper).abs());
    }
    Ok(worst)
}

/// Symmetrized operator `diag(pi)^(-1/2) K diag(pi)^(1/2)`, returned as its
/// diagonal and off-diagonal `sqrt(lambda_k mu_{k+1})`.
pub(crate) fn symmetrized(op: &TridiagonalOperator) -> (Vec<f64>, Vec<f64>) {
    let off = (1..op.dim())
        .map(|k| (0.5 * (op.log_sub(k) + op.sup(k).ln())).exp())
        .collect();
    (op.diagonal().to_vec(), off)
}
