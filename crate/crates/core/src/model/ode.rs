use serde::{Deserialize, Serialize};

use super::drift::drift_into;
use super::{ModelParams, TailVector};
use crate::error::{Error, Result};

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Emit every `stride`-th step (the initial and final states are always kept).
    pub stride: usize,
}

impl OdeOptions {
    /// Default step `0.01 / beta`.
    pub fn new(params: &ModelParams, t_end: f64) -> Self {
        Self { t_end, dt: 0.01 / params.beta(), stride: 10 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<TailVector>,
    /// Largest projection distance applied by the clip to the state space.
    pub max_clip: f64,
}

impl OdeTrajectory {
    pub fn last(&self) -> &TailVector {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Classical RK4 for `u' = F(u)` with `u(K+1) = 0`, projecting each step back
/// onto the (truncated) state space.
pub fn integrate_ode(v0: &TailVector, params: &ModelParams, opts: &OdeOptions) -> Result<OdeTrajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", opts.dt)));
    }
    if !(opts.t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be nonnegative, got {}", opts.t_end)));
    }
    let level = v0.level();
    let stride = opts.stride.max(1);
    let steps = (opts.t_end / opts.dt).ceil() as usize;
    let low = -2.0 * opts.dt * params.beta();
    let high = 1.0 + 2.0 * opts.dt * params.alpha();

    let mut u = v0.as_slice().to_vec();
    let mut times = vec![0.0];
    let mut states = vec![v0.clone()];
    let mut max_clip = 0.0f64;

    let mut k1 = vec![0.0; level];
    let mut k2 = vec![0.0; level];
    let mut k3 = vec![0.0; level];
    let mut k4 = vec![0.0; level];
    let mut tmp = u.clone();
    let mut t = 0.0;

    for step in 1..=steps {
        let h = if step == steps { opts.t_end - t } else { opts.dt };
        if h <= 0.0 {
            break;
        }
        drift_into(&u, params, &mut k1);
        stage(&u, &k1, 0.5 * h, &mut tmp);
        drift_into(&tmp, params, &mut k2);
        stage(&u, &k2, 0.5 * h, &mut tmp);
        drift_into(&tmp, params, &mut k3);
        stage(&u, &k3, h, &mut tmp);
        drift_into(&tmp, params, &mut k4);
        for k in 1..=level {
            let i = k - 1;
            u[k] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = if step == steps { opts.t_end } else { step as f64 * opts.dt };

        let mut ceiling = 1.0f64;
        for (k, value) in u.iter_mut().enumerate().skip(1) {
            if !(*value >= low && *value <= high) {
                return Err(Error::StepRejected { time: t, index: k, value: *value });
            }
            let clipped = value.clamp(0.0, ceiling);
            max_clip = max_clip.max((clipped - *value).abs());
            *value = clipped;
            ceiling = clipped;
        }

        if step % stride == 0 || step == steps {
            times.push(t);
            states.push(TailVector::from_raw(u.clone()));
        }
    }

    Ok(OdeTrajectory { times, states, max_clip })
}

fn stage(u: &[f64], slope: &[f64], h: f64, out: &mut [f64]) {
    out[0] = u[0];
    for k in 1..u.len() {
        out[k] = u[k] + h * slope[k - 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixed_point;

    #[test]
    fn fixed_point_is_stationary() {
        let p = ModelParams::with_load(0.7, 2).unwrap();
        let u = fixed_point(&p, p.default_truncation().unwrap()).unwrap();
        let traj = integrate_ode(&u, &p, &OdeOptions::new(&p, 10.0)).unwrap();
        for s in &traj.states {
            for k in 0..=u.level() {
                assert!((s.get(k) - u.get(k)).abs() < 1e-9);
            }
        }
        assert!((traj.times.last().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn full_start_relaxes_to_fixed_point() {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        let k = p.default_truncation().unwrap();
        let u = fixed_point(&p, k).unwrap();
        let traj = integrate_ode(&TailVector::full(k).unwrap(), &p, &OdeOptions::new(&p, 300.0).with_stride(1000))
            .unwrap();
        let last = traj.last();
        let err = (1..=k).map(|i| (last.get(i) - u.get(i)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "sup error {err}");
    }

    #[test]
    fn rejects_bad_step() {
        let p = ModelParams::with_load(0.5, 2).unwrap();
        let v = TailVector::empty(3).unwrap();
        assert!(integrate_ode(&v, &p, &OdeOptions::new(&p, 1.0).with_dt(0.0)).is_err());
        assert!(matches!(
            integrate_ode(&v, &p, &OdeOptions::new(&p, 10.0).with_dt(5.0)),
            Err(Error::StepRejected { .. })
        ));
    }
}
