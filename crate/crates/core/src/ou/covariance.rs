use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::NoiseVariances;
use crate::error::{Error, Result};
use crate::model::check_dims;
use crate::spectral::{potential_coefficients, TridiagonalOperator};

/// Above this dimension the half-vectorized system (with `K(K+1)/2`
/// unknowns) is replaced by the eigendecomposition route.
const HALF_VEC_LIMIT: usize = 64;
const PSD_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    HalfVectorized,
    Eigen,
}

/// Solution `Sigma` of `K Sigma + Sigma K^T = -diag(v~)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCovariance {
    pub sigma: DMatrix<f64>,
    pub method: CovarianceMethod,
    /// `max |K Sigma + Sigma K^T + diag(v~)|`.
    pub residual: f64,
    pub min_eigenvalue: f64,
}

impl StationaryCovariance {
    /// Wraps a user-supplied matrix, checking symmetry and the PSD floor.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::DimensionMismatch { expected: sigma.nrows(), got: sigma.ncols() });
        }
        let sigma = symmetrize(sigma);
        let min_eigenvalue = min_eigenvalue(&sigma);
        if min_eigenvalue < PSD_FLOOR {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(Self { sigma, method: CovarianceMethod::Eigen, residual: f64::NAN, min_eigenvalue })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// `Sigma_{ij}`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma[(i - 1, j - 1)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.sigma.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Solves the stationary Lyapunov equation.
///
/// The unknown is rescaled as `Sigma = P^(1/2) M P^(1/2)` with `P = diag(pi)`,
/// which turns `K` into the symmetric `S = P^(-1/2) K P^(1/2)` and the
/// right-hand side into `diag(v~ / pi)`; both are of order one even though
/// `pi` and `v~` decay doubly exponentially. Falls back to unit scaling
/// when the operator has no potential coefficients.
pub fn stationary_covariance(op: &TridiagonalOperator, nv: &NoiseVariances) -> Result<StationaryCovariance> {
    check_dims(op.dim(), nv.level())?;
    let n = op.dim();
    let (log_scale, s) = match potential_coefficients(op) {
        Ok(pi) => {
            let log_pi = pi.log_values().to_vec();
            let s = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    op.diag(i + 1)
                } else if i == j + 1 {
                    (0.5 * (op.log_sub(j + 1) + op.sup(j + 1).ln())).exp()
                } else if j == i + 1 {
                    (0.5 * (op.log_sub(i + 1) + op.sup(i + 1).ln())).exp()
                } else {
                    0.0
                }
            });
            (log_pi, s)
        }
        Err(_) => (vec![0.0; n], op.to_dense()),
    };
    let rhs: Vec<f64> = (0..n)
        .map(|k| {
            let v = nv.as_slice()[k];
            if v > 0.0 {
                (v.ln() - log_scale[k]).exp()
            } else {
                0.0
            }
        })
        .collect();

    let symmetric = (0..n).all(|i| (0..i).all(|j| s[(i, j)] == s[(j, i)]));
    let (m, method) = if n <= HALF_VEC_LIMIT || !symmetric {
        (solve_half_vectorized(&s, &rhs)?, CovarianceMethod::HalfVectorized)
    } else {
        (solve_by_eigen(&s, &rhs)?, CovarianceMethod::Eigen)
    };

    let half: Vec<f64> = log_scale.iter().map(|l| 0.5 * l).collect();
    let sigma = symmetrize(DMatrix::from_fn(n, n, |i, j| {
        let x = m[(i, j)];
        if x == 0.0 {
            0.0
        } else {
            x.signum() * (x.abs().ln() + half[i] + half[j]).exp()
        }
    }));
    let residual = lyapunov_residual(op, nv, &sigma);
    let min_eigenvalue = min_eigenvalue(&sigma);
    if min_eigenvalue < PSD_FLOOR {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
    }
    Ok(StationaryCovariance { sigma, method, residual, min_eigenvalue })
}

/// `max |K Sigma + Sigma K^T + diag(v~)|`.
pub fn lyapunov_residual(op: &TridiagonalOperator, nv: &NoiseVariances, sigma: &DMatrix<f64>) -> f64 {
    let k = op.to_dense();
    let mut r = &k * sigma + sigma * k.transpose();
    for (i, v) in nv.as_slice().iter().enumerate() {
        r[(i, i)] += v;
    }
    r.amax()
}

/// `S M + M S^T = -diag(rhs)` over the unknowns `M_ij`, `i <= j`, assuming
/// `M` symmetric. `S` need not be symmetric.
fn solve_half_vectorized(s: &DMatrix<f64>, rhs: &[f64]) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    let index = |i: usize, j: usize| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * n - a * (a + 1) / 2 + b
    };
    let unknowns = n * (n + 1) / 2;
    let mut a = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut b = nalgebra::DVector::<f64>::zeros(unknowns);
    for i in 0..n {
        for j in i..n {
            let row = index(i, j);
            // (S M)_ij = sum_l S_il M_lj ; (M S^T)_ij = sum_l M_il S_jl
            for l in i.saturating_sub(1)..(i + 2).min(n) {
                a[(row, index(l, j))] += s[(i, l)];
            }
            for l in j.saturating_sub(1)..(j + 2).min(n) {
                a[(row, index(i, l))] += s[(j, l)];
            }
            if i == j {
                b[row] = -rhs[i];
            }
        }
    }
    let lu = a.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Singular("Lyapunov system has no unique solution; is the spectral gap zero?".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("Lyapunov solve produced non-finite entries".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| x[index(i, j)]))
}

/// Eigen route for symmetric `S = Q L Q^T`: `M = Q [G_ij / -(l_i + l_j)] Q^T`
/// with `G = Q^T diag(rhs) Q`.
fn solve_by_eigen(s: &DMatrix<f64>, rhs: &[f64]) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    let eig = SymmetricEigen::new(s.clone());
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top < 0.0) {
        return Err(Error::Singular(format!("operator has eigenvalue {top} >= 0")));
    }
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(rhs));
    let g = q.transpose() * d * q;
    let inner = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / -(eig.eigenvalues[i] + eig.eigenvalues[j]));
    Ok(q * inner * q.transpose())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::ou::noise_variances;
    use crate::spectral::build_operator;

    #[test]
    fn scalar_case() {
        let op = TridiagonalOperator::from_parts(vec![], vec![-1.5], vec![]).unwrap();
        let nv = NoiseVariances::new(vec![0.6]).unwrap();
        let c = stationary_covariance(&op, &nv).unwrap();
        assert!((c.get(1, 1) - 0.6 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn residual_and_psd() {
        for l in 1..=4 {
            for rho in [0.5, 0.9] {
                let p = ModelParams::with_load(rho, l).unwrap();
                let k = p.default_truncation().unwrap();
                let op = build_operator(&p, k).unwrap();
                let c = stationary_covariance(&op, &noise_variances(&p, k).unwrap()).unwrap();
                assert!(c.residual < 1e-10, "L={l} rho={rho}: {}", c.residual);
                assert!(c.min_eigenvalue >= -1e-12);
            }
        }
    }

    #[test]
    fn both_routes_agree() {
        let p = ModelParams::with_load(0.7, 2).unwrap();
        let op = build_operator(&p, 10).unwrap();
        let nv = noise_variances(&p, 10).unwrap();
        let pi = potential_coefficients(&op).unwrap();
        let s = DMatrix::from_fn(10, 10, |i, j| {
            let x = op.to_dense()[(i, j)];
            x * (0.5 * (pi.log(j + 1) - pi.log(i + 1))).exp()
        });
        let rhs: Vec<f64> = (0..10).map(|k| nv.as_slice()[k] / pi.get(k + 1)).collect();
        let a = solve_half_vectorized(&s, &rhs).unwrap();
        let b = solve_by_eigen(&symmetrize(s), &rhs).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn non_symmetric_operator_without_potential() {
        let op = TridiagonalOperator::from_parts(vec![0.0], vec![-1.0, -2.0], vec![0.5]).unwrap();
        let nv = NoiseVariances::new(vec![1.0, 1.0]).unwrap();
        let c = stationary_covariance(&op, &nv).unwrap();
        assert!(c.residual < 1e-14);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(StationaryCovariance::from_matrix(m).is_err());
    }
}
