use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::StationaryCovariance;
use crate::error::{Error, Result};
use crate::model::CenteredVector;
use crate::rng::{stream_rng, ReplicaRng};

const PSD_FLOOR: f64 = -1e-12;

/// Draws from `N(0, Sigma)` using `Sigma = F F^T`, `F = Q diag(sqrt(lambda))`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
    rng: ReplicaRng,
}

impl GaussianSampler {
    pub fn new(sigma: &DMatrix<f64>, seed: u64) -> Result<Self> {
        Ok(Self { factor: symmetric_factor(sigma)?, rng: stream_rng(seed, 0) })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample(&mut self) -> CenteredVector {
        let n = self.factor.ncols();
        let xi = DVector::from_fn(n, |_, _| self.rng.sample::<f64, _>(StandardNormal));
        CenteredVector::new((&self.factor * xi).as_slice().to_vec())
    }
}

/// Sampler for the invariant law of the Ornstein-Uhlenbeck process.
pub fn gaussian_invariant_sampler(cov: &StationaryCovariance, seed: u64) -> Result<GaussianSampler> {
    GaussianSampler::new(&cov.sigma, seed)
}

/// `F` with `F F^T = Sigma`; eigenvalues in `[-1e-12, 0)` are clamped to zero.
pub(crate) fn symmetric_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < PSD_FLOOR {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_gives_zero() {
        let mut s = GaussianSampler::new(&DMatrix::zeros(3, 3), 5).unwrap();
        assert_eq!(s.sample(), CenteredVector::zeros(3));
    }

    #[test]
    fn factor_reproduces_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = symmetric_factor(&m).unwrap();
        assert!((&f * f.transpose() - m).amax() < 1e-14);
    }

    #[test]
    fn seeded_draws_repeat() {
        let m = DMatrix::identity(4, 4);
        let a = GaussianSampler::new(&m, 9).unwrap().sample();
        let b = GaussianSampler::new(&m, 9).unwrap().sample();
        assert_eq!(a, b);
    }
}
