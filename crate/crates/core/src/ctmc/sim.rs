use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, DiscreteCDF, Normal, Poisson};

use super::state::SystemState;
use crate::error::{Error, Result};
use crate::model::{falling_factorial, ModelParams};
use crate::rng::{stream_rng, ReplicaRng};

/// How an arrival picks its `L` candidate queues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `L` distinct queues (partial Fisher-Yates).
    #[default]
    WithoutReplacement,
    /// `L` independent uniform picks.
    WithReplacement,
}

/// Jump counts and compensators per tail coordinate `k = 1..=K`.
///
/// `up_intensity[k]` integrates `N F+^N(R_s)(k)`, the rate at which `R(k)`
/// moves up by `1/N`, and `down_intensity[k]` integrates `N F-(R_s)(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub size: usize,
    pub level: usize,
    pub horizon: f64,
    pub up_jumps: Vec<u64>,
    pub down_jumps: Vec<u64>,
    pub up_intensity: Vec<f64>,
    pub down_intensity: Vec<f64>,
    /// Jumps in coordinates beyond the truncation level.
    pub overflow_jumps: u64,
}

impl EventLog {
    /// [`z_score`] of the total jumps of each coordinate against its
    /// integrated total intensity; zero where nothing happened.
    pub fn bracket_z_scores(&self) -> Vec<f64> {
        (0..self.level)
            .map(|i| {
                let jumps = (self.up_jumps[i] + self.down_jumps[i]) as f64;
                z_score(jumps, self.up_intensity[i] + self.down_intensity[i])
            })
            .collect()
    }

    /// Same statistic for up-jumps alone.
    pub fn up_z_scores(&self) -> Vec<f64> {
        (0..self.level).map(|i| z_score(self.up_jumps[i] as f64, self.up_intensity[i])).collect()
    }
}

/// Normal score of a jump count against a Poisson law with the compensator
/// as mean: `(J - Lambda)/sqrt(Lambda)` for large means, and below that the
/// standard normal quantile of the Poisson tail beyond `J`, so that rarely
/// visited coordinates are not flagged for a single jump.
pub fn z_score(count: f64, intensity: f64) -> f64 {
    if intensity >= 100.0 {
        return (count - intensity) / intensity.sqrt();
    }
    if !(intensity > 0.0) {
        return if count == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let law = Poisson::new(intensity).expect("positive mean");
    let normal = Normal::standard();
    let j = count as u64;
    if count >= intensity {
        let upper = if j == 0 { 1.0 } else { law.sf(j - 1) };
        (-normal.inverse_cdf(upper)).max(0.0)
    } else {
        normal.inverse_cdf(law.cdf(j)).min(0.0)
    }
}

/// Lazily integrated jump intensities: each coordinate is brought up to
/// date only when its rate changes.
#[derive(Debug, Clone)]
struct IntensityTracker {
    level: usize,
    start: f64,
    last: Vec<f64>,
    up_rate: Vec<f64>,
    down_rate: Vec<f64>,
    log: EventLog,
}

/// Event-driven simulator of the `N`-queue pool.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    state: SystemState,
    time: f64,
    rng: ReplicaRng,
    sampling: Sampling,
    perm: Vec<usize>,
    events: u64,
    tracker: Option<IntensityTracker>,
}

/// What happened in one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    /// A customer joined queue `queue`, whose length became `length`.
    Arrival { queue: usize, length: usize },
    /// A customer left queue `queue`, whose length was `length`.
    Departure { queue: usize, length: usize },
}

impl Simulator {
    pub fn new(params: ModelParams, state: SystemState, seed: u64, stream: u64) -> Result<Self> {
        let n = state.size();
        if n == 0 {
            return Err(Error::InvalidArgument("the pool needs at least one queue".into()));
        }
        if n < params.choices() {
            return Err(Error::InvalidArgument(format!(
                "pool size {n} is smaller than the choice count {}",
                params.choices()
            )));
        }
        Ok(Self {
            params,
            state,
            time: 0.0,
            rng: stream_rng(seed, stream),
            sampling: Sampling::default(),
            perm: (0..n).collect(),
            events: 0,
            tracker: None,
        })
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    /// Starts recording jumps and compensators for coordinates `1..=level`.
    pub fn record_events(&mut self, level: usize) {
        let mut t = IntensityTracker {
            level,
            start: self.time,
            last: vec![self.time; level + 1],
            up_rate: vec![0.0; level + 1],
            down_rate: vec![0.0; level + 1],
            log: EventLog {
                size: self.state.size(),
                level,
                horizon: 0.0,
                up_jumps: vec![0; level],
                down_jumps: vec![0; level],
                up_intensity: vec![0.0; level],
                down_intensity: vec![0.0; level],
                overflow_jumps: 0,
            },
        };
        for k in 1..=level {
            t.up_rate[k] = self.up_rate(k);
            t.down_rate[k] = self.down_rate(k);
        }
        self.tracker = Some(t);
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn into_state(self) -> SystemState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Rate at which `R(k)` jumps up: `N alpha` times the probability that the
    /// shortest sampled queue has length exactly `k - 1`.
    pub fn up_rate(&self, k: usize) -> f64 {
        let n = self.state.size();
        let l = self.params.choices();
        let a = self.state.tail_count(k - 1) as f64;
        let b = self.state.tail_count(k) as f64;
        let prob = match self.sampling {
            Sampling::WithoutReplacement => {
                let nf = falling_factorial(n as f64, l);
                (falling_factorial(a, l) - falling_factorial(b, l)) / nf
            }
            Sampling::WithReplacement => {
                let nf = n as f64;
                (a / nf).powi(l as i32) - (b / nf).powi(l as i32)
            }
        };
        n as f64 * self.params.alpha() * prob
    }

    /// Rate at which `R(k)` jumps down: `beta c(k)`.
    pub fn down_rate(&self, k: usize) -> f64 {
        self.params.beta() * self.state.occupancy(k) as f64
    }

    /// Total event rate `N alpha + beta #busy`.
    pub fn total_rate(&self) -> f64 {
        self.state.size() as f64 * self.params.alpha() + self.params.beta() * self.state.busy_count() as f64
    }

    /// Runs to `t_target`, calling `observe(state, holding_time)` for every
    /// sojourn (the last one truncated at `t_target`).
    pub fn advance_observed(&mut self, t_target: f64, mut observe: impl FnMut(&SystemState, f64)) {
        while self.time < t_target {
            let total = self.total_rate();
            let e: f64 = self.rng.sample(Exp1);
            let hold = e / total;
            if self.time + hold >= t_target {
                observe(&self.state, t_target - self.time);
                self.time = t_target;
                break;
            }
            observe(&self.state, hold);
            self.time += hold;
            self.fire(total);
        }
        self.flush();
    }

    /// Runs to `t_target`.
    pub fn advance(&mut self, t_target: f64) {
        self.advance_observed(t_target, |_, _| {});
    }

    /// Runs until `count` more events have fired.
    pub fn advance_events(&mut self, count: u64, mut observe: impl FnMut(&SystemState, f64)) {
        for _ in 0..count {
            let total = self.total_rate();
            let e: f64 = self.rng.sample(Exp1);
            let hold = e / total;
            observe(&self.state, hold);
            self.time += hold;
            self.fire(total);
        }
        self.flush();
    }

    /// Fires one event at the current time and returns it.
    fn fire(&mut self, total: f64) -> Event {
        self.events += 1;
        let arrivals = self.state.size() as f64 * self.params.alpha();
        let u: f64 = self.rng.random::<f64>() * total;
        let event = if u < arrivals || self.state.busy_count() == 0 {
            let queue = self.choose_queue();
            let length = self.state.push(queue);
            Event::Arrival { queue, length }
        } else {
            let slot = self.rng.random_range(0..self.state.busy_count());
            let queue = self.state.busy_queue(slot);
            let length = self.state.pop(queue);
            Event::Departure { queue, length }
        };
        if self.tracker.is_some() {
            self.log_event(event);
        }
        event
    }

    /// Samples `L` queues and returns a uniformly chosen shortest one.
    fn choose_queue(&mut self) -> usize {
        let n = self.state.size();
        let l = self.params.choices();
        let mut best = usize::MAX;
        let mut best_len = u32::MAX;
        let mut ties = 0u32;
        for i in 0..l {
            let q = match self.sampling {
                Sampling::WithoutReplacement => {
                    let j = self.rng.random_range(i..n);
                    self.perm.swap(i, j);
                    self.perm[i]
                }
                Sampling::WithReplacement => self.rng.random_range(0..n),
            };
            let len = self.state.length(q);
            if len < best_len {
                best = q;
                best_len = len;
                ties = 1;
            } else if len == best_len {
                ties += 1;
                if self.rng.random_range(0..ties) == 0 {
                    best = q;
                }
            }
        }
        best
    }

    fn log_event(&mut self, event: Event) {
        let (j, up) = match event {
            Event::Arrival { length, .. } => (length, true),
            Event::Departure { length, .. } => (length, false),
        };
        let time = self.time;
        let level = self.tracker.as_ref().map_or(0, |t| t.level);
        // The jump changed tail[j]; rates at k = j - 1, j, j + 1 move.
        let touched = [j.wrapping_sub(1), j, j + 1];
        if let Some(t) = self.tracker.as_mut() {
            for &k in &touched {
                if (1..=level).contains(&k) {
                    t.settle(k, time);
                }
            }
            if j <= level {
                if up {
                    t.log.up_jumps[j - 1] += 1;
                } else {
                    t.log.down_jumps[j - 1] += 1;
                }
            } else {
                t.log.overflow_jumps += 1;
            }
        }
        for &k in &touched {
            if (1..=level).contains(&k) {
                let (ur, dr) = (self.up_rate(k), self.down_rate(k));
                let t = self.tracker.as_mut().expect("tracker present");
                t.up_rate[k] = ur;
                t.down_rate[k] = dr;
            }
        }
    }

    fn flush(&mut self) {
        let time = self.time;
        if let Some(t) = self.tracker.as_mut() {
            for k in 1..=t.level {
                t.settle(k, time);
            }
            t.log.horizon = time - t.start;
        }
    }

    /// The event log so far, if recording.
    pub fn event_log(&self) -> Option<&EventLog> {
        self.tracker.as_ref().map(|t| &t.log)
    }
}

impl IntensityTracker {
    fn settle(&mut self, k: usize, time: f64) {
        let dt = time - self.last[k];
        self.log.up_intensity[k - 1] += self.up_rate[k] * dt;
        self.log.down_intensity[k - 1] += self.down_rate[k] * dt;
        self.last[k] = time;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_hold_along_a_run() {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        let mut sim = Simulator::new(p, SystemState::empty(50), 3, 0).unwrap();
        for _ in 0..2000 {
            sim.advance_events(1, |_, _| {});
            let s = sim.state();
            assert!(s.tail_counts().windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(s.tail_count(0), 50);
        }
        assert!(sim.state().check_invariants());
    }

    #[test]
    fn every_queue_sampled_joins_global_minimum() {
        let p = ModelParams::new(1.0, 1.0, 5).unwrap();
        let mut sim = Simulator::new(p, SystemState::from_lengths(vec![3, 1, 4, 1, 5]), 1, 0).unwrap();
        let min_before = *sim.state().lengths().iter().min().unwrap();
        match sim.fire(f64::MIN_POSITIVE) {
            Event::Arrival { length, .. } => assert_eq!(length as u32, min_before + 1),
            Event::Departure { .. } => unreachable!("u < total forces an arrival"),
        }
    }

    #[test]
    fn same_seed_same_events() {
        let p = ModelParams::with_load(0.8, 2).unwrap();
        let run = |seed| {
            let mut sim = Simulator::new(p, SystemState::empty(30), seed, 4).unwrap();
            sim.advance(20.0);
            (sim.events(), sim.into_state())
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn z_scores_are_calibrated() {
        assert_eq!(z_score(0.0, 0.0), 0.0);
        assert!((z_score(120.0, 100.0) - 2.0).abs() < 1e-12);
        // one jump against a tiny compensator is unremarkable
        let z = z_score(1.0, 0.03);
        assert!(z > 1.5 && z < 2.5, "{z}");
        assert!(z_score(0.0, 0.03) == 0.0);
        assert!(z_score(0.0, 30.0) < -4.0);
    }

    #[test]
    fn rejects_pool_smaller_than_choices() {
        let p = ModelParams::with_load(0.5, 3).unwrap();
        assert!(Simulator::new(p, SystemState::empty(2), 0, 0).is_err());
    }
}
