//! Exact simulation of the finite pool: `N` single-server queues, arrivals
//! at rate `N alpha` routed to the shortest of `L` sampled queues, service
//! at rate `beta` per busy queue.

mod equilibrium;
mod oracle;
mod sim;
mod state;

pub use equilibrium::{
    default_burn_in, equilibrium_warmup, fluctuation_samples, map_replicas, simulate, FluctuationOptions,
    FluctuationSample, InitialCondition, SimulationRun, Snapshot,
};
pub use oracle::{exact_small_oracle, OracleDistribution};
pub use sim::{z_score, Event, EventLog, Sampling, Simulator};
pub use state::{rounded_equilibrium, SystemState};

use serde::{Deserialize, Serialize};

/// Per-coordinate bracket check of one event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleDiagnostic {
    pub z_scores: Vec<f64>,
    pub up_z_scores: Vec<f64>,
    pub max_abs_z: f64,
    /// Coordinates (1-based) with `|z| > threshold`.
    pub flagged: Vec<usize>,
}

/// Compares the realized jump count of every coordinate with its
/// compensator through [`z_score`].
pub fn martingale_diagnostic(log: &EventLog, threshold: f64) -> MartingaleDiagnostic {
    let z_scores = log.bracket_z_scores();
    let up_z_scores = log.up_z_scores();
    let max_abs_z = z_scores.iter().map(|z| z.abs()).fold(0.0, f64::max);
    let flagged = z_scores
        .iter()
        .enumerate()
        .filter(|(_, z)| z.abs() > threshold)
        .map(|(i, _)| i + 1)
        .collect();
    MartingaleDiagnostic { z_scores, up_z_scores, max_abs_z, flagged }
}
