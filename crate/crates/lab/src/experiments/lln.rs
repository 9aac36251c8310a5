//! Law of large numbers: equilibrium error decay across the `N` grid and a
//! transient run from the empty system against the ODE.

use std::path::Path;

use serde_json::json;

use jsq_core::ctmc::{default_burn_in, map_replicas, simulate, InitialCondition, Simulator, SystemState};
use jsq_core::model::{fixed_point, integrate_ode, OdeOptions};
use jsq_core::rng::replica_seed;
use jsq_core::stats::{least_squares, mean, variance};
use jsq_core::TailVector;

use crate::config::Resolved;
use crate::error::Result;
use crate::report::{sample_row, write_csv, TestReport, SAMPLE_HEADER};

/// Number of equally spaced sample times on `[0, t_end]` in the transient run.
const TRANSIENT_POINTS: usize = 11;

pub(super) fn run(cfg: &Resolved, out: &Path) -> Result<TestReport> {
    let params = cfg.params();
    let level = cfg.level;
    let u = fixed_point(&params, level)?;
    let t_burn = match cfg.t_burn {
        Some(t) => t,
        None => default_burn_in(&params)?,
    };
    let th = &cfg.thresholds;
    let mut report = TestReport::new(cfg);

    // equilibrium start: rounded fixed point, then burn-in
    let mut eq_rows = Vec::new();
    let mut errors = Vec::new();
    let mut per_size = Vec::new();
    for &n in &cfg.sizes {
        let base = replica_seed(cfg.seed, n as u64);
        let start = SystemState::rounded(n, &u);
        let finals = map_replicas(cfg.replicas, |r| {
            let seed = replica_seed(base, r);
            let mut sim = Simulator::new(params, start.clone(), seed, 0)?;
            sim.advance(t_burn);
            Ok((seed, sim.into_state()))
        })?;
        let mut means = Vec::with_capacity(level);
        for k in 1..=level {
            let xs: Vec<f64> = finals.iter().map(|(_, s)| s.fraction(k)).collect();
            means.push(mean(&xs));
        }
        let error = (1..=level).map(|k| (means[k - 1] - u.get(k)).abs()).fold(0.0, f64::max);
        let sn = (n as f64).sqrt();
        for (seed, s) in &finals {
            report.replica_seeds.push(*seed);
            for k in 1..=level {
                let r = s.fraction(k);
                eq_rows.push(sample_row(cfg, n, *seed, t_burn, k, r, sn * (r - u.get(k))));
            }
        }
        errors.push(error);
        per_size.push(json!({ "N": n, "sup_error": error, "mean": means }));
    }
    write_csv(&out.join("lln_equilibrium.csv"), &SAMPLE_HEADER, eq_rows)?;
    report.artifacts.push("lln_equilibrium.csv".into());

    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    report.holds("equilibrium_error_strictly_decreasing", decreasing);
    let slope = if cfg.sizes.len() >= 2 {
        let xs: Vec<f64> = cfg.sizes.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
        least_squares(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    match slope {
        Some(s) => report.within("equilibrium_log_log_slope", s, th.lln_slope_min, th.lln_slope_max),
        None => report.holds("equilibrium_log_log_slope", false),
    }

    // transient start: empty system against the ODE at the same times
    let times: Vec<f64> =
        (0..TRANSIENT_POINTS).map(|i| cfg.t_end * i as f64 / (TRANSIENT_POINTS - 1) as f64).collect();
    let ode_path = ode_at(&TailVector::empty(level)?, cfg, &times)?;
    let mut tr_rows = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut transient = Vec::new();
    for &n in &cfg.sizes {
        let base = replica_seed(cfg.seed ^ 0x7472_616e_7369_656e, n as u64);
        let runs = map_replicas(cfg.replicas, |r| {
            let seed = replica_seed(base, r);
            let run = simulate(&params, n, &InitialCondition::Empty, cfg.t_end, &times, seed, None)?;
            Ok((seed, run.snapshots))
        })?;
        let sn = (n as f64).sqrt();
        let mut sup_error = 0.0f64;
        let mut size_excess = f64::NEG_INFINITY;
        for ti in 0..times.len() {
            for k in 1..=level {
                let xs: Vec<f64> = runs.iter().map(|(_, snaps)| snaps[ti].fraction(k)).collect();
                let m = mean(&xs);
                let se = (variance(&xs) / xs.len() as f64).sqrt();
                let err = (m - ode_path[ti].get(k)).abs();
                let band = th.lln_band_se * se + th.lln_bias_allowance / n as f64;
                sup_error = sup_error.max(err);
                size_excess = size_excess.max(err - band);
            }
        }
        for (seed, snaps) in &runs {
            for (ti, snap) in snaps.iter().enumerate() {
                for k in 1..=level {
                    let r = snap.fraction(k);
                    tr_rows.push(sample_row(cfg, n, *seed, times[ti], k, r, sn * (r - ode_path[ti].get(k))));
                }
            }
        }
        worst_excess = worst_excess.max(size_excess);
        transient.push(json!({ "N": n, "sup_error": sup_error, "max_excess_over_band": size_excess }));
    }
    write_csv(&out.join("lln_transient.csv"), &SAMPLE_HEADER, tr_rows)?;
    report.artifacts.push("lln_transient.csv".into());
    report.at_most("transient_max_excess_over_band", worst_excess, 0.0);

    report.statistics = json!({
        "level": level,
        "t_burn": t_burn,
        "equilibrium": per_size,
        "slope": slope,
        "transient_times": times,
        "transient": transient,
        "ode": ode_path.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>(),
    });
    Ok(report)
}

/// ODE solution from `v0` evaluated at the sorted times `times`.
fn ode_at(v0: &TailVector, cfg: &Resolved, times: &[f64]) -> Result<Vec<TailVector>> {
    let params = cfg.params();
    let mut out = Vec::with_capacity(times.len());
    let mut current = v0.clone();
    let mut t_prev = 0.0;
    for &t in times {
        if t > t_prev {
            let opts = OdeOptions::new(&params, t - t_prev).with_dt(cfg.dt).with_stride(usize::MAX);
            current = integrate_ode(&current, &params, &opts)?.last().clone();
            t_prev = t;
        }
        out.push(current.clone());
    }
    Ok(out)
}
