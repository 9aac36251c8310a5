use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dims, CenteredVector, ModelParams};

/// A `K x K` tridiagonal matrix acting on centered vectors.
///
/// Off-diagonal entries below the diagonal are also kept as logarithms:
/// for the linearized operator they decay doubly exponentially and
/// underflow long before the truncation level is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    diag: Vec<f64>,
    /// Entry `(k+1, k)`, `k = 1..K-1`.
    sub: Vec<f64>,
    /// Entry `(k, k+1)`, `k = 1..K-1`.
    sup: Vec<f64>,
    log_sub: Vec<f64>,
    /// Log of the rate leaving the truncation from state `K` (birth rate `lambda_K`).
    log_exit_birth: f64,
}

impl TridiagonalOperator {
    /// Generic constructor with entries `(k+1,k) = sub[k-1]`, `(k,k) = diag[k-1]`
    /// and `(k,k+1) = sup[k-1]`.
    pub fn from_parts(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let dim = diag.len();
        if dim < 1 {
            return Err(Error::Truncation { min: 1, got: dim });
        }
        check_dims(dim - 1, sub.len())?;
        check_dims(dim - 1, sup.len())?;
        let log_sub = sub.iter().map(|s| s.ln()).collect();
        let mut op = Self { diag, sub, sup, log_sub, log_exit_birth: f64::NEG_INFINITY };
        let exit = -op.diag[dim - 1] - op.death_rate(dim);
        op.log_exit_birth = exit.ln();
        Ok(op)
    }

    /// Transpose of the generator of a birth-death process on `1..=K` with
    /// births `lambda_k` and deaths `mu_k`: `diag = -(lambda + mu)`,
    /// `sub = lambda_1..lambda_{K-1}`, `sup = mu_2..mu_K`.
    pub fn from_birth_death(log_births: &[f64], deaths: &[f64]) -> Result<Self> {
        let dim = log_births.len();
        check_dims(dim, deaths.len())?;
        if dim < 1 {
            return Err(Error::Truncation { min: 1, got: dim });
        }
        if let Some(i) = deaths.iter().position(|m| !(*m > 0.0)) {
            return Err(Error::NonPositiveRate { index: i + 1, value: deaths[i] });
        }
        let births: Vec<f64> = log_births.iter().map(|b| b.exp()).collect();
        Ok(Self {
            diag: births.iter().zip(deaths).map(|(b, m)| -(b + m)).collect(),
            sub: births[..dim - 1].to_vec(),
            sup: deaths[1..].to_vec(),
            log_sub: log_births[..dim - 1].to_vec(),
            log_exit_birth: log_births[dim - 1],
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Diagonal entry `k`, 1-based.
    pub fn diag(&self, k: usize) -> f64 {
        self.diag[k - 1]
    }

    /// Entry `(k+1, k)`, `1 <= k < K`.
    pub fn sub(&self, k: usize) -> f64 {
        self.sub[k - 1]
    }

    pub fn log_sub(&self, k: usize) -> f64 {
        self.log_sub[k - 1]
    }

    /// Entry `(k, k+1)`, `1 <= k < K`.
    pub fn sup(&self, k: usize) -> f64 {
        self.sup[k - 1]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn subdiagonal(&self) -> &[f64] {
        &self.sub
    }

    pub fn superdiagonal(&self) -> &[f64] {
        &self.sup
    }

    /// Birth rate `lambda_k` of the associated birth-death process, `1 <= k <= K`.
    pub fn log_birth_rate(&self, k: usize) -> f64 {
        if k < self.dim() {
            self.log_sub[k - 1]
        } else {
            self.log_exit_birth
        }
    }

    pub fn birth_rate(&self, k: usize) -> f64 {
        if k < self.dim() {
            self.sub[k - 1]
        } else {
            self.log_exit_birth.exp()
        }
    }

    /// Death rate `mu_k`; `mu_1` is the killing rate at state 1.
    pub fn death_rate(&self, k: usize) -> f64 {
        if k == 1 {
            let first_birth = if self.dim() > 1 { self.sub[0] } else { self.log_exit_birth.exp() };
            -self.diag[0] - first_birth
        } else {
            self.sup[k - 2]
        }
    }

    /// Scales entry `(k+1, k)` only, leaving the diagonal untouched.
    pub fn with_sub_scaled(mut self, k: usize, factor: f64) -> Self {
        self.sub[k - 1] *= factor;
        self.log_sub[k - 1] += factor.ln();
        self
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &CenteredVector) -> Result<CenteredVector> {
        check_dims(self.dim(), x.level())?;
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x.as_slice(), &mut out);
        Ok(CenteredVector::new(out))
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i == j + 1 {
                self.sub[j]
            } else if j == i + 1 {
                self.sup[i]
            } else {
                0.0
            }
        })
    }

    /// Column sums; nonpositive for a sub-Markovian generator transpose.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j + 1 < n {
                    s += self.sub[j];
                }
                if j > 0 {
                    s += self.sup[j - 1];
                }
                s
            })
            .collect()
    }

    /// Maximum absolute row sum, a Gershgorin-style bound on the spectrum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.sub[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.sup[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Truncation of the linearized operator at the fixed point, with
/// `sub(k) = beta L rho^(L^k)`, `sup(k) = beta` and
/// `diag(k) = -(beta L rho^(L^k) + beta)`, the last diagonal entry kept whole.
pub fn build_operator(params: &ModelParams, dim: usize) -> Result<TridiagonalOperator> {
    params.require_stable()?;
    if dim < 2 {
        return Err(Error::Truncation { min: 2, got: dim });
    }
    let beta = params.beta();
    let log_scale = (beta * params.choices() as f64).ln();
    let log_rho = params.rho().ln();
    let log_births: Vec<f64> =
        (1..=dim).map(|k| log_scale + params.choices_pow(k) * log_rho).collect();
    TridiagonalOperator::from_birth_death(&log_births, &vec![beta; dim])
}
