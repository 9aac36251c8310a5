use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sampler::symmetric_factor;
use super::{stationary_covariance, NoiseVariances};
use crate::error::{Error, Result};
use crate::model::{check_dims, CenteredVector};
use crate::rng::stream_rng;
use crate::spectral::{exponential_matrix, TridiagonalOperator};

/// Largest admissible `dt * ||K||_inf` for the Euler-Maruyama scheme.
pub const EULER_GUARD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuMethod {
    EulerMaruyama,
    /// Gaussian transitions with mean `e^{K dt} z` and covariance
    /// `Sigma - e^{K dt} Sigma e^{K^T dt}`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Record every `stride`-th step; the initial state is always kept.
    pub stride: usize,
    pub method: OuMethod,
}

impl OuOptions {
    pub fn euler(t_end: f64, dt: f64) -> Self {
        Self { t_end, dt, stride: 1, method: OuMethod::EulerMaruyama }
    }

    pub fn exact(t_end: f64, dt: f64) -> Self {
        Self { t_end, dt, stride: 1, method: OuMethod::Exact }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuPath {
    pub times: Vec<f64>,
    pub states: Vec<CenteredVector>,
    pub seed: u64,
    pub dt: f64,
    pub method: OuMethod,
}

/// Simulates `dZ = K Z dt + dB` with `Var B_t(k) = v~(k) t`.
pub fn simulate_ou(
    op: &TridiagonalOperator,
    nv: &NoiseVariances,
    z0: &CenteredVector,
    opts: &OuOptions,
    seed: u64,
) -> Result<OuPath> {
    let n = op.dim();
    check_dims(n, nv.level())?;
    check_dims(n, z0.level())?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) || !(opts.t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t_end >= 0, got {} and {}", opts.dt, opts.t_end)));
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let stride = opts.stride.max(1);
    let mut rng = stream_rng(seed, 0);
    let mut z = DVector::from_column_slice(z0.as_slice());
    let mut times = vec![0.0];
    let mut states = vec![z0.clone()];
    let mut record = |step: usize, z: &DVector<f64>| {
        if step % stride == 0 || step == steps {
            times.push(step as f64 * opts.dt);
            states.push(CenteredVector::new(z.as_slice().to_vec()));
        }
    };

    match opts.method {
        OuMethod::EulerMaruyama => {
            let guard = opts.dt * op.norm_inf();
            if guard >= EULER_GUARD {
                return Err(Error::StabilityGuard { value: guard, limit: EULER_GUARD });
            }
            let scale: Vec<f64> = nv.as_slice().iter().map(|v| (v * opts.dt).sqrt()).collect();
            let mut kz = vec![0.0; n];
            for step in 1..=steps {
                op.apply_into(z.as_slice(), &mut kz);
                for i in 0..n {
                    let xi: f64 = rng.sample(StandardNormal);
                    z[i] += opts.dt * kz[i] + scale[i] * xi;
                }
                record(step, &z);
            }
        }
        OuMethod::Exact => {
            let e = exponential_matrix(op, opts.dt)?;
            let sigma = stationary_covariance(op, nv)?.sigma;
            let step_cov: DMatrix<f64> = &sigma - &e * &sigma * e.transpose();
            let factor = symmetric_factor(&step_cov)?;
            for step in 1..=steps {
                let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                z = &e * &z + &factor * xi;
                record(step, &z);
            }
        }
    }
    Ok(OuPath { times, states, seed, dt: opts.dt, method: opts.method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::ou::noise_variances;
    use crate::spectral::{build_operator, matrix_exponential_action};

    fn setup() -> (TridiagonalOperator, NoiseVariances) {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        let k = p.default_truncation().unwrap();
        (build_operator(&p, k).unwrap(), noise_variances(&p, k).unwrap())
    }

    #[test]
    fn noiseless_path_follows_semigroup() {
        let (op, _) = setup();
        let quiet = NoiseVariances::new(vec![0.0; op.dim()]).unwrap();
        let e1 = CenteredVector::unit(op.dim(), 1);
        let path = simulate_ou(&op, &quiet, &e1, &OuOptions::euler(1.0, 1e-5).with_stride(1000), 3).unwrap();
        let exact = matrix_exponential_action(&op, &e1, 1.0).unwrap();
        let last = path.states.last().unwrap();
        for k in 1..=op.dim() {
            assert!((last.get(k) - exact.get(k)).abs() < 1e-4);
        }
        assert_eq!(path.states[0], e1);
    }

    #[test]
    fn same_seed_same_path() {
        let (op, nv) = setup();
        let z0 = CenteredVector::zeros(op.dim());
        let opts = OuOptions::euler(2.0, 1e-2).with_stride(10);
        let a = simulate_ou(&op, &nv, &z0, &opts, 11).unwrap();
        let b = simulate_ou(&op, &nv, &z0, &opts, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_ou(&op, &nv, &z0, &opts, 12).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn guard_rejects_large_steps() {
        let (op, nv) = setup();
        let z0 = CenteredVector::zeros(op.dim());
        let err = simulate_ou(&op, &nv, &z0, &OuOptions::euler(1.0, 0.5), 1).unwrap_err();
        assert!(matches!(err, Error::StabilityGuard { .. }));
        assert!(simulate_ou(&op, &nv, &z0, &OuOptions::exact(1.0, 0.5), 1).is_ok());
    }
}
