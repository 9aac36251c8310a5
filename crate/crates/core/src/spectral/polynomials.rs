//! Birth-death orthogonal polynomials `Q_n` defined by `Q_0 = 0`, `Q_1 = 1` and
//!
//! `lambda_n Q_{n+1}(x) = (lambda_n + mu_n - x) Q_n(x) - mu_n Q_{n-1}(x)`.
//!
//! Direct evaluation overflows quickly because `lambda_n` decays doubly
//! exponentially, so the recursion is carried on the rescaled polynomials
//! `P_n = lambda_1 ... lambda_{n-1} Q_n`, which share the zeros of `Q_n` and
//! satisfy `P_{n+1} = (a_n - x) P_n - b_n P_{n-1}` with `a_n = lambda_n + mu_n`
//! and `b_n = lambda_{n-1} mu_n`. `P_n(x)` is, up to sign, the characteristic
//! polynomial of the leading `(n-1) x (n-1)` block of `-K`.

use serde::{Deserialize, Serialize};

use super::TridiagonalOperator;

const RESCALE_HIGH: f64 = 1e150;
const RESCALE_LOW: f64 = 1e-150;

/// Recursion coefficients of the polynomial family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSystem {
    log_births: Vec<f64>,
    births: Vec<f64>,
    deaths: Vec<f64>,
}

/// `Q_1(x), ..., Q_n(x)` as signs and log magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialValues {
    pub signs: Vec<i8>,
    pub log_abs: Vec<f64>,
}

impl PolynomialValues {
    /// `Q_j(x)`, 1-based; may overflow to infinity.
    pub fn value(&self, j: usize) -> f64 {
        f64::from(self.signs[j - 1]) * self.log_abs[j - 1].exp()
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.signs.len()).map(|j| self.value(j)).collect()
    }
}

impl PolynomialSystem {
    pub fn from_operator(op: &TridiagonalOperator) -> Self {
        let n = op.dim();
        Self {
            log_births: (1..=n).map(|k| op.log_birth_rate(k)).collect(),
            births: (1..=n).map(|k| op.birth_rate(k)).collect(),
            deaths: (1..=n).map(|k| op.death_rate(k)).collect(),
        }
    }

    /// Highest degree index `n` for which `Q_n` is defined by the stored rates.
    pub fn max_index(&self) -> usize {
        self.births.len() + 1
    }

    fn diag(&self, j: usize) -> f64 {
        self.births[j - 1] + self.deaths[j - 1]
    }

    /// `b_j = lambda_{j-1} mu_j`, `j >= 2`.
    fn coupling(&self, j: usize) -> f64 {
        (self.log_births[j - 2] + self.deaths[j - 1].ln()).exp()
    }

    /// Number of zeros of `Q_n` lying strictly below `x`, from the signs of the
    /// pivots of `J - x` (Sturm count).
    pub fn count_below(&self, x: f64, n: usize) -> usize {
        let m = n - 1;
        let mut count = 0;
        let mut q = 1.0;
        let pivmin = f64::MIN_POSITIVE.sqrt();
        for j in 1..=m {
            q = if j == 1 {
                self.diag(1) - x
            } else {
                (self.diag(j) - x) - self.coupling(j) / q
            };
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing every zero of `Q_n`.
    pub fn zero_bounds(&self, n: usize) -> (f64, f64) {
        let m = n - 1;
        let off: Vec<f64> = (2..=m).map(|j| self.coupling(j).sqrt()).collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 1..=m {
            let left = if j >= 2 { off[j - 2] } else { 0.0 };
            let right = if j <= m - 1 { off[j - 1] } else { 0.0 };
            lo = lo.min(self.diag(j) - left - right);
            hi = hi.max(self.diag(j) + left + right);
        }
        (lo.min(0.0), hi)
    }

    /// `i`-th smallest zero of `Q_n` by bisection on the Sturm count.
    pub fn zero(&self, n: usize, i: usize, tol: f64) -> Option<f64> {
        if i == 0 || i > n - 1 {
            return None;
        }
        let (mut lo, mut hi) = self.zero_bounds(n);
        let width = hi - lo;
        lo -= 1e-12 * width.max(1.0);
        hi += 1e-12 * width.max(1.0);
        if self.count_below(lo, n) >= i || self.count_below(hi, n) < i {
            return None;
        }
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid, n) >= i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Evaluates `Q_1(x), ..., Q_n(x)`.
pub fn evaluate_polynomials(ps: &PolynomialSystem, x: f64, n: usize) -> PolynomialValues {
    assert!(n >= 1, "degree index must be at least 1");
    assert!(n <= ps.max_index(), "degree index {n} exceeds the stored recursion");
    let mut signs = Vec::with_capacity(n);
    let mut log_abs = Vec::with_capacity(n);
    // P_{j-1}, P_j and the common log scale divided out of both
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    let mut scale = 0.0f64;
    let mut log_lambda_prod = 0.0f64;
    for j in 1..=n {
        if j >= 2 {
            let a = ps.diag(j - 1) - x;
            let next = if j == 2 { a * cur } else { a * cur - ps.coupling(j - 1) * prev };
            prev = cur;
            cur = next;
            log_lambda_prod += ps.log_births[j - 2];
        }
        let mag = cur.abs().max(prev.abs());
        if mag > RESCALE_HIGH || (mag < RESCALE_LOW && mag > 0.0) {
            let s = mag;
            prev /= s;
            cur /= s;
            scale += s.ln();
        }
        signs.push(if cur > 0.0 {
            1
        } else if cur < 0.0 {
            -1
        } else {
            0
        });
        log_abs.push(cur.abs().ln() + scale - log_lambda_prod);
    }
    PolynomialValues { signs, log_abs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::spectral::build_operator;

    fn system(rho: f64, l: usize, dim: usize) -> PolynomialSystem {
        PolynomialSystem::from_operator(&build_operator(&ModelParams::new(rho * 1.5, 1.5, l).unwrap(), dim).unwrap())
    }

    #[test]
    fn first_two_polynomials() {
        let ps = system(0.6, 2, 8);
        let (beta, l, rho) = (1.5f64, 2.0f64, 0.6f64);
        let lambda1 = beta * l * rho.powi(2);
        for x in [-1.0, 0.0, 0.3, 2.5] {
            let vals = evaluate_polynomials(&ps, x, 5);
            assert!((vals.value(1) - 1.0).abs() < 1e-15);
            let q2 = (lambda1 + beta - x) / lambda1;
            assert!((vals.value(2) - q2).abs() < 1e-12 * q2.abs().max(1.0));
        }
    }

    #[test]
    fn three_term_recursion_holds() {
        let ps = system(0.8, 1, 10);
        let x = 0.37;
        let vals = evaluate_polynomials(&ps, x, 10).values();
        for n in 2..10 {
            let lambda = ps.births[n - 1];
            let mu = ps.deaths[n - 1];
            let lhs = lambda * vals[n];
            let rhs = (lambda + mu - x) * vals[n - 1] - mu * vals[n - 2];
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn deep_degrees_stay_finite_in_log_form() {
        let ps = system(0.9, 2, 60);
        let vals = evaluate_polynomials(&ps, 0.1, 60);
        assert!(vals.log_abs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sturm_count_brackets_zeros() {
        let ps = system(0.5, 1, 12);
        let z = ps.zero(12, 1, 1e-13).unwrap();
        let near = evaluate_polynomials(&ps, z - 1e-6, 12).signs[11];
        let far = evaluate_polynomials(&ps, z + 1e-6, 12).signs[11];
        assert_ne!(near, far);
        assert_eq!(ps.count_below(z - 1e-6, 12), 0);
        assert_eq!(ps.count_below(z + 1e-6, 12), 1);
    }
}
