use serde::{Deserialize, Serialize};

use super::sim::{EventLog, Sampling, Simulator};
use super::state::SystemState;
use crate::error::{Error, Result};
use crate::model::{fixed_point, CenteredVector, ModelParams};
use crate::rng::replica_seed;
use crate::spectral::spectral_gap;

/// Starting configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Empty,
    /// `N u~(k)` rounded to the lattice.
    RoundedFixedPoint,
    Lengths(Vec<u32>),
    TailCounts(Vec<usize>),
}

impl InitialCondition {
    pub fn build(&self, params: &ModelParams, n: usize) -> Result<SystemState> {
        match self {
            Self::Empty => Ok(SystemState::empty(n)),
            Self::RoundedFixedPoint => {
                super::state::rounded_equilibrium(params, n, params.default_truncation()?)
            }
            Self::Lengths(l) => {
                if l.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: l.len() });
                }
                Ok(SystemState::from_lengths(l.clone()))
            }
            Self::TailCounts(c) => SystemState::from_tail_counts(n, c),
        }
    }
}

/// Tail counts recorded at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// `tail[k] = #{i : length_i >= k}` for `k = 0..=max length`.
    pub tail_counts: Vec<usize>,
}

impl Snapshot {
    pub fn fraction(&self, k: usize) -> f64 {
        self.tail_counts.get(k).copied().unwrap_or(0) as f64 / self.tail_counts[0] as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub snapshots: Vec<Snapshot>,
    pub log: Option<EventLog>,
    pub final_state: SystemState,
    pub events: u64,
}

/// Simulates on `[0, t_end]`, recording snapshots at `sample_times` (sorted,
/// within `[0, t_end]`) and optionally an event log up to `log_level`.
pub fn simulate(
    params: &ModelParams,
    n: usize,
    init: &InitialCondition,
    t_end: f64,
    sample_times: &[f64],
    seed: u64,
    log_level: Option<usize>,
) -> Result<SimulationRun> {
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&t| !(0.0..=t_end).contains(&t)) {
        return Err(Error::InvalidArgument("sample times must be sorted and lie in [0, t_end]".into()));
    }
    let state = init.build(params, n)?;
    let mut sim = Simulator::new(*params, state, seed, 0)?;
    if let Some(level) = log_level {
        sim.record_events(level);
    }
    let mut snapshots = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        sim.advance(t);
        snapshots.push(Snapshot { time: t, tail_counts: sim.state().tail_counts().to_vec() });
    }
    sim.advance(t_end);
    Ok(SimulationRun {
        snapshots,
        log: sim.event_log().cloned(),
        events: sim.events(),
        final_state: sim.into_state(),
    })
}

/// Default burn-in `10 / gamma_hat`.
pub fn default_burn_in(params: &ModelParams) -> Result<f64> {
    let level = params.default_truncation()?;
    Ok(10.0 / spectral_gap(params, level + 1, 1e-12)?.gamma_hat)
}

/// Rounded fixed-point start followed by `t_burn` of simulated time
/// (default [`default_burn_in`]).
pub fn equilibrium_warmup(params: &ModelParams, n: usize, seed: u64, t_burn: Option<f64>) -> Result<SystemState> {
    params.require_stable()?;
    let t_burn = match t_burn {
        Some(t) => t,
        None => default_burn_in(params)?,
    };
    let state = InitialCondition::RoundedFixedPoint.build(params, n)?;
    let mut sim = Simulator::new(*params, state, seed, 0)?;
    sim.advance(t_burn);
    Ok(sim.into_state())
}

/// One equilibrium draw of `Z^N = sqrt(N) (R^N - u~)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSample {
    pub size: usize,
    pub time: f64,
    pub seed: u64,
    pub replica: u64,
    pub z: CenteredVector,
    /// `#{i : length_i >= k}` for `k = 1..=K`.
    pub counts: Vec<usize>,
    /// Queues longer than `K`.
    pub overflow: usize,
}

impl FluctuationSample {
    /// `N (z(k)/sqrt(N) + u~(k))` is an integer in `[0, N]` for every `k`.
    pub fn is_on_lattice(&self, u_tilde: &crate::model::TailVector, tol: f64) -> bool {
        let sn = (self.size as f64).sqrt();
        (1..=self.z.level()).all(|k| {
            let x = self.size as f64 * (self.z.get(k) / sn + u_tilde.get(k));
            (x - x.round()).abs() <= tol && x.round() >= 0.0 && x.round() <= self.size as f64
        })
    }
}

/// Options for [`fluctuation_samples`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationOptions {
    pub t_burn: Option<f64>,
    pub sampling: Sampling,
}

impl Default for FluctuationOptions {
    fn default() -> Self {
        Self { t_burn: None, sampling: Sampling::WithoutReplacement }
    }
}

/// `M` independent equilibrium samples; replica `r` runs on
/// [`replica_seed`]`(seed, r)`. Runs on the ambient rayon pool when the `parallel` feature is on.
pub fn fluctuation_samples(
    params: &ModelParams,
    n: usize,
    level: usize,
    replicas: usize,
    seed: u64,
    opts: &FluctuationOptions,
) -> Result<Vec<FluctuationSample>> {
    params.require_stable()?;
    let t_burn = match opts.t_burn {
        Some(t) => t,
        None => default_burn_in(params)?,
    };
    let u = fixed_point(params, level)?;
    let start = SystemState::rounded(n, &u);
    let one = |r: u64| -> Result<FluctuationSample> {
        let rs = replica_seed(seed, r);
        let mut sim = Simulator::new(*params, start.clone(), rs, 0)?.with_sampling(opts.sampling);
        sim.advance(t_burn);
        let s = sim.state();
        Ok(FluctuationSample {
            size: n,
            time: t_burn,
            seed: rs,
            replica: r,
            z: s.fluctuation(&u),
            counts: (1..=level).map(|k| s.tail_count(k)).collect(),
            overflow: s.overflow(level),
        })
    };
    map_replicas(replicas, one)
}

/// Maps `f` over replica indices `0..m`, in order, in parallel when enabled.
pub fn map_replicas<T: Send>(m: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..m as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..m as u64).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshots_at_requested_times() {
        let p = ModelParams::with_load(0.7, 2).unwrap();
        let run = simulate(&p, 40, &InitialCondition::Empty, 5.0, &[0.0, 1.0, 2.5], 1, Some(5)).unwrap();
        assert_eq!(run.snapshots.len(), 3);
        assert_eq!(run.snapshots[0].tail_counts, vec![40]);
        assert_eq!(run.log.unwrap().horizon, 5.0);
        assert!(simulate(&p, 40, &InitialCondition::Empty, 5.0, &[2.0, 1.0], 1, None).is_err());
    }

    #[test]
    fn samples_sit_on_the_lattice() {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        let level = p.default_truncation().unwrap();
        let opts = FluctuationOptions { t_burn: Some(5.0), ..Default::default() };
        let samples = fluctuation_samples(&p, 100, level, 4, 2, &opts).unwrap();
        let u = fixed_point(&p, level).unwrap();
        assert!(samples.iter().all(|s| s.is_on_lattice(&u, 1e-9)));
        assert_ne!(samples[0].z, samples[1].z);
    }
}
