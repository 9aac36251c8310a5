//! Exponential decay of perturbations of the fixed point, measured in
//! `L2(g_theta)` for the linear flow `z' = K z` and the full mean-field ODE.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::expm::Propagator;
use super::{build_operator, spectral_gap};
use crate::error::{Error, Result};
use crate::model::{
    fixed_point, integrate_ode, weighted_norm, CenteredVector, ModelParams, OdeOptions, TailVector,
    WeightSequence,
};
use crate::rng::stream_rng;
use crate::stats::least_squares;

/// Knobs for [`exponential_stability_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    /// Truncation level; the default rule when `None`.
    pub level: Option<usize>,
    /// Horizon in units of `1 / gamma_hat`.
    pub horizon: f64,
    /// Number of sample times on `(0, t_end]`.
    pub samples: usize,
    /// Fraction of the horizon discarded before fitting and before checking monotonicity.
    pub burn_in: f64,
    /// Norms below `floor * ||x_0||` are treated as round-off and left out of the fit.
    pub floor: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { level: None, horizon: 20.0, samples: 200, burn_in: 0.5, floor: 1e-11 }
    }
}

/// Least-squares fit of `ln ||x_t|| = ln(C ||x_0||) - rate t` on the tail of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// Norm nonincreasing on the fit window (relative slack `1e-9`).
    pub monotone: bool,
    /// Enough usable points and a finite fit.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrial {
    pub flow: FlowKind,
    pub label: String,
    pub initial_norm: f64,
    pub fit: DecayFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub theta: f64,
    pub level: usize,
    pub gamma_hat: f64,
    pub t_end: f64,
    /// `beta (1 - sqrt(theta))^2` when `L = 1`.
    pub reference_rate: Option<f64>,
    pub trials: Vec<StabilityTrial>,
    pub worst_rate: f64,
    pub worst_prefactor: f64,
    pub all_decay: bool,
}

impl StabilityReport {
    pub fn trial(&self, flow: FlowKind, label: &str) -> Option<&StabilityTrial> {
        self.trials.iter().find(|t| t.flow == flow && t.label == label)
    }
}

/// Runs the linear flow from `e_1` and `trials` random vectors, and the ODE
/// from the all-ones state, a state above the fixed point, a state below it
/// and `trials` random states; fits the decay rate of each.
pub fn exponential_stability_check(
    theta: f64,
    params: &ModelParams,
    trials: usize,
    seed: u64,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    params.require_stable()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
    }
    if params.choices() == 1 && theta < params.rho() {
        return Err(Error::InvalidArgument(format!(
            "with a single choice theta must be at least rho = {}, got {theta}",
            params.rho()
        )));
    }
    if opts.samples < 10 || !(opts.burn_in >= 0.0 && opts.burn_in < 1.0) || !(opts.horizon > 0.0) {
        return Err(Error::InvalidArgument("stability options out of range".into()));
    }
    let level = match opts.level {
        Some(k) => k,
        None => params.default_truncation()?,
    };
    let op = build_operator(params, level)?;
    let gamma_hat = spectral_gap(params, level + 1, 1e-13)?.gamma_hat;
    let t_end = opts.horizon / gamma_hat;
    let weights = WeightSequence::geometric(theta, level)?;
    let times: Vec<f64> = (0..=opts.samples).map(|i| t_end * i as f64 / opts.samples as f64).collect();
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::new();

    let prop = Propagator::new(&op)?;
    let mut linear_starts = vec![("unit".to_string(), CenteredVector::unit(level, 1))];
    for i in 0..trials {
        let z: Vec<f64> = (1..=level).map(|k| rng.random_range(-1.0..1.0) * theta.powi(k as i32)).collect();
        linear_starts.push((format!("random-{i}"), CenteredVector::new(z)));
    }
    for (label, z0) in linear_starts {
        let mut z = z0.as_slice().to_vec();
        let mut norms = vec![weighted_norm(&z0, &weights)?];
        for w in times.windows(2) {
            prop.advance(&mut z, w[1] - w[0]);
            norms.push(weighted_norm(&CenteredVector::new(z.clone()), &weights)?);
        }
        out.push(trial(FlowKind::Linear, label, &times, &norms, opts));
    }

    let u_tilde = fixed_point(params, level)?;
    let mut nonlinear_starts = vec![
        ("all-ones".to_string(), TailVector::full(level)?),
        ("above".to_string(), scaled_fixed_point(&u_tilde, 2.0)),
        ("below".to_string(), scaled_fixed_point(&u_tilde, 0.5)),
    ];
    for i in 0..trials {
        nonlinear_starts.push((format!("random-{i}"), random_tail(&mut rng, level)));
    }
    let ode_dt = 0.01 / params.beta();
    let stride = ((t_end / opts.samples as f64) / ode_dt).round().max(1.0) as usize;
    let ode = OdeOptions::new(params, t_end).with_stride(stride);
    for (label, u0) in nonlinear_starts {
        let traj = integrate_ode(&u0, params, &ode)?;
        let mut norms = Vec::with_capacity(traj.states.len());
        for s in &traj.states {
            norms.push(weighted_norm(&s.centered_at(&u_tilde)?, &weights)?);
        }
        out.push(trial(FlowKind::Nonlinear, label, &traj.times, &norms, opts));
    }

    let worst_rate = out.iter().map(|t| t.fit.rate).fold(f64::INFINITY, f64::min);
    let worst_prefactor = out.iter().map(|t| t.fit.prefactor).fold(0.0, f64::max);
    let all_decay = out.iter().all(|t| t.fit.converged && t.fit.rate > 0.0);
    Ok(StabilityReport {
        theta,
        level,
        gamma_hat,
        t_end,
        reference_rate: (params.choices() == 1).then(|| params.beta() * (1.0 - theta.sqrt()).powi(2)),
        trials: out,
        worst_rate,
        worst_prefactor,
        all_decay,
    })
}

/// `min(1, c u~(k))`, a monotone state above (`c > 1`) or below (`c < 1`) the fixed point.
fn scaled_fixed_point(u: &TailVector, c: f64) -> TailVector {
    let mut v: Vec<f64> = u.as_slice().iter().map(|x| (c * x).min(1.0)).collect();
    v[0] = 1.0;
    TailVector::from_raw(v)
}

/// Sorted uniforms, giving a random point of the truncated state space.
fn random_tail(rng: &mut impl Rng, level: usize) -> TailVector {
    let mut tail: Vec<f64> = (0..level).map(|_| rng.random::<f64>()).collect();
    tail.sort_by(|a, b| b.total_cmp(a));
    let mut v = vec![1.0];
    v.extend(tail);
    TailVector::from_raw(v)
}

fn trial(flow: FlowKind, label: String, times: &[f64], norms: &[f64], opts: &StabilityOptions) -> StabilityTrial {
    let initial_norm = norms[0];
    StabilityTrial { flow, label, initial_norm, fit: fit_decay(times, norms, opts) }
}

/// Fits the decay on `[burn_in * t_end, t_end]`, ignoring round-off-level norms.
pub fn fit_decay(times: &[f64], norms: &[f64], opts: &StabilityOptions) -> DecayFit {
    let t_end = times.last().copied().unwrap_or(0.0);
    let n0 = norms[0];
    let threshold = opts.floor * n0;
    let start = opts.burn_in * t_end;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for (&t, &n) in times.iter().zip(norms) {
        if t < start || !(n > threshold) {
            continue;
        }
        if n > prev * (1.0 + 1e-9) {
            monotone = false;
        }
        prev = n;
        xs.push(t);
        ys.push(n.ln());
    }
    match least_squares(&xs, &ys) {
        Some(fit) if xs.len() >= 8 && fit.slope.is_finite() => DecayFit {
            rate: -fit.slope,
            prefactor: (fit.intercept - n0.ln()).exp(),
            r_squared: fit.r_squared,
            monotone,
            converged: true,
        },
        _ => DecayFit { rate: f64::NAN, prefactor: f64::NAN, r_squared: f64::NAN, monotone, converged: false },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_choices_decay() {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        let r = exponential_stability_check(0.9, &p, 3, 7, &StabilityOptions::default()).unwrap();
        assert!(r.all_decay, "{r:#?}");
        let unit = r.trial(FlowKind::Linear, "unit").unwrap();
        assert!(unit.fit.rate > 0.0);
        let ones = r.trial(FlowKind::Nonlinear, "all-ones").unwrap();
        assert!(ones.fit.rate > 0.0 && ones.fit.monotone);
    }

    #[test]
    fn single_choice_rate_near_reference() {
        let p = ModelParams::with_load(0.5, 1).unwrap();
        let r = exponential_stability_check(0.5, &p, 0, 1, &StabilityOptions::default()).unwrap();
        let unit = r.trial(FlowKind::Linear, "unit").unwrap();
        let reference = r.reference_rate.unwrap();
        assert!((unit.fit.rate / reference - 1.0).abs() < 0.2, "{} vs {reference}", unit.fit.rate);
    }

    #[test]
    fn rejects_theta_below_load_for_single_choice() {
        let p = ModelParams::with_load(0.5, 1).unwrap();
        assert!(exponential_stability_check(0.4, &p, 0, 1, &StabilityOptions::default()).is_err());
    }

    #[test]
    fn fit_recovers_pure_exponential() {
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let norms: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_decay(&times, &norms, &StabilityOptions::default());
        assert!((fit.rate - 0.7).abs() < 1e-12 && (fit.prefactor - 1.0).abs() < 1e-10 && fit.monotone);
    }
}
