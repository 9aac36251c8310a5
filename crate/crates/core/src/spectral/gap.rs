use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::potential::symmetrized;
use super::{build_operator, PolynomialSystem, TridiagonalOperator};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Smallest and second-smallest zero of `Q_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeZeros {
    pub degree: usize,
    pub smallest: f64,
    pub second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGapEstimate {
    /// `x_{n,1}` (and `x_{n,2}`) for `n = 2..=n_max`.
    pub zeros_by_degree: Vec<DegreeZeros>,
    /// `x_{n_max,1}`, an upper estimate of the gap since the zeros decrease in `n`.
    pub gamma_hat: f64,
    /// Richardson refinement of the last zeros assuming an `n^-2` error.
    pub gamma_extrapolated: f64,
    /// Smallest eigenvalue of the symmetrized `(n_max - 1)`-dimensional truncation.
    pub eigen_oracle: f64,
    pub oracle_relative_error: f64,
    /// `beta`, the upper end of the admissible range of the gap.
    pub upper_bound: f64,
    /// Lower edge `beta (1 - sqrt(rho))^2` of the continuous spectrum when `L = 1`.
    pub continuous_edge: Option<f64>,
    /// `x_{n+1,1} <= x_{n,1}` for every computed `n` (within the bisection tolerance).
    pub monotone: bool,
    /// `x_{n+1,1} <= x_{n,1} <= x_{n+1,2}` for every computed `n`.
    pub interlacing: bool,
}

/// Estimates the spectral gap of the linearized operator from the smallest
/// zeros of the birth-death polynomials.
pub fn spectral_gap(params: &ModelParams, n_max: usize, tol: f64) -> Result<SpectralGapEstimate> {
    if n_max < 3 {
        return Err(Error::InvalidArgument(format!("n_max must be at least 3, got {n_max}")));
    }
    let op = build_operator(params, n_max - 1)?;
    let mut estimate = gap_of_operator(&op, n_max, tol)?;
    estimate.upper_bound = params.beta();
    if params.choices() == 1 {
        estimate.continuous_edge = Some(params.beta() * (1.0 - params.rho().sqrt()).powi(2));
    }
    Ok(estimate)
}

/// Gap analysis for any birth-death operator with at least `n_max - 1` states.
pub fn gap_of_operator(op: &TridiagonalOperator, n_max: usize, tol: f64) -> Result<SpectralGapEstimate> {
    if n_max < 3 || n_max > op.dim() + 1 {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} must lie in 3..={} for this operator",
            op.dim() + 1
        )));
    }
    let ps = PolynomialSystem::from_operator(op);
    let mut zeros = Vec::with_capacity(n_max - 1);
    for n in 2..=n_max {
        let smallest = ps.zero(n, 1, tol).ok_or(Error::BracketLost { degree: n })?;
        let second = if n >= 3 {
            Some(ps.zero(n, 2, tol).ok_or(Error::BracketLost { degree: n })?)
        } else {
            None
        };
        zeros.push(DegreeZeros { degree: n, smallest, second });
    }

    let slack = 4.0 * tol;
    let monotone = zeros.windows(2).all(|w| w[1].smallest <= w[0].smallest + slack);
    let interlacing = zeros.windows(2).all(|w| {
        w[1].smallest <= w[0].smallest + slack
            && w[1].second.is_some_and(|s| w[0].smallest <= s + slack)
    });

    let gamma_hat = zeros.last().map(|z| z.smallest).unwrap_or(f64::NAN);
    let gamma_extrapolated = richardson(&zeros).unwrap_or(gamma_hat);

    let eigen_oracle = smallest_symmetrized_eigenvalue(op, n_max - 1);
    let oracle_relative_error = (gamma_hat - eigen_oracle).abs() / eigen_oracle.abs();

    Ok(SpectralGapEstimate {
        zeros_by_degree: zeros,
        gamma_hat,
        gamma_extrapolated,
        eigen_oracle,
        oracle_relative_error,
        upper_bound: f64::NAN,
        continuous_edge: None,
        monotone,
        interlacing,
    })
}

/// Two-point extrapolation `(n^2 x_n - m^2 x_m) / (n^2 - m^2)` with `m = n/2`.
///
/// Skipped once consecutive zeros agree to `1e-10` relative: for `L >= 2`
/// the zeros settle faster than any power of `n` and the `n^-2` model no
/// longer applies.
fn richardson(zeros: &[DegreeZeros]) -> Option<f64> {
    let last = zeros.last()?;
    let before = zeros.get(zeros.len().checked_sub(2)?)?;
    if (before.smallest - last.smallest).abs() <= 1e-10 * last.smallest.abs() {
        return Some(last.smallest);
    }
    let n = last.degree;
    let m = n / 2;
    if m < 2 {
        return None;
    }
    let half = zeros.iter().find(|z| z.degree == m)?;
    let (nf, mf) = ((n * n) as f64, (m * m) as f64);
    let value = (nf * last.smallest - mf * half.smallest) / (nf - mf);
    (value > 0.0 && value <= last.smallest).then_some(value)
}

/// Smallest eigenvalue of `-diag(pi)^(-1/2) K diag(pi)^(1/2)` restricted to the
/// leading `dim` states.
pub fn smallest_symmetrized_eigenvalue(op: &TridiagonalOperator, dim: usize) -> f64 {
    let (diag, off) = symmetrized(op);
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            -diag[i]
        } else if i == j + 1 {
            -off[j]
        } else if j == i + 1 {
            -off[i]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_lies_in_admissible_range() {
        for l in 1..=3 {
            for rho in [0.5, 0.9] {
                let p = ModelParams::new(rho * 2.0, 2.0, l).unwrap();
                let g = spectral_gap(&p, 20, 1e-12).unwrap();
                assert!(g.gamma_hat > 0.0 && g.gamma_hat <= p.beta(), "{g:?}");
                assert!(g.monotone && g.interlacing);
                assert!(g.oracle_relative_error < 1e-6);
            }
        }
    }

    #[test]
    fn single_choice_zeros_follow_chebyshev_form() {
        let (alpha, beta) = (0.5f64, 1.0f64);
        let p = ModelParams::new(alpha, beta, 1).unwrap();
        let g = spectral_gap(&p, 12, 1e-13).unwrap();
        for z in &g.zeros_by_degree {
            let n = z.degree as f64;
            let expected = alpha + beta - 2.0 * (alpha * beta).sqrt() * (std::f64::consts::PI / n).cos();
            assert!((z.smallest - expected).abs() < 1e-10, "n={n}");
        }
        let edge = g.continuous_edge.unwrap();
        assert!(g.gamma_extrapolated < g.gamma_hat);
        assert!((g.gamma_extrapolated - edge).abs() < (g.gamma_hat - edge).abs());
    }

    #[test]
    fn rejects_small_degree() {
        let p = ModelParams::with_load(0.5, 2).unwrap();
        assert!(spectral_gap(&p, 2, 1e-12).is_err());
    }
}
