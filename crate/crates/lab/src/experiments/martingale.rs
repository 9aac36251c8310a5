//! Compensator check: realized jump counts of each coordinate against their
//! integrated intensities, replica by replica.

use std::path::Path;

use serde_json::json;

use jsq_core::ctmc::{map_replicas, martingale_diagnostic, rounded_equilibrium, Simulator};
use jsq_core::rng::replica_seed;

use crate::config::Resolved;
use crate::error::Result;
use crate::report::{write_csv, write_json, TestReport};

pub(super) fn run(cfg: &Resolved, out: &Path) -> Result<TestReport> {
    let params = cfg.params();
    let th = &cfg.thresholds;
    let n = cfg.sizes[0];
    let level = cfg.level;
    let base = replica_seed(cfg.seed, n as u64);
    let start = rounded_equilibrium(&params, n, level)?;
    let logs = map_replicas(cfg.replicas, |r| {
        let seed = replica_seed(base, r);
        let mut sim = Simulator::new(params, start.clone(), seed, 0)?;
        sim.record_events(level);
        sim.advance(cfg.t_end);
        let log = sim.event_log().cloned().expect("recording was enabled");
        let diag = martingale_diagnostic(&log, th.martingale_z);
        Ok((r, seed, log, diag))
    })?;

    let clean = logs.iter().filter(|(_, _, _, d)| d.flagged.is_empty()).count();
    let fraction = clean as f64 / logs.len() as f64;
    let worst = logs.iter().map(|(_, _, _, d)| d.max_abs_z).fold(0.0, f64::max);
    let mut report = TestReport::new(cfg);
    report.replica_seeds = logs.iter().map(|(_, s, _, _)| *s).collect();
    report.at_least("fraction_replicas_within_z", fraction, th.martingale_fraction);
    report.note("max_abs_z", worst, format!("<= {}", th.martingale_z), worst <= th.martingale_z);

    let mut rows = Vec::new();
    for (r, seed, log, d) in &logs {
        for k in 1..=level {
            rows.push(vec![
                r.to_string(),
                seed.to_string(),
                k.to_string(),
                log.up_jumps[k - 1].to_string(),
                log.down_jumps[k - 1].to_string(),
                log.up_intensity[k - 1].to_string(),
                log.down_intensity[k - 1].to_string(),
                d.z_scores[k - 1].to_string(),
                d.up_z_scores[k - 1].to_string(),
            ]);
        }
    }
    write_csv(
        &out.join("martingale.csv"),
        &["replica", "seed", "k", "up_jumps", "down_jumps", "up_intensity", "down_intensity", "z", "up_z"],
        rows,
    )?;
    let summaries: Vec<_> = logs
        .iter()
        .map(|(r, seed, log, d)| json!({ "replica": r, "seed": seed, "log": log, "diagnostic": d }))
        .collect();
    write_json(&out.join("event_logs.json"), &summaries)?;
    report.artifacts.extend(["martingale.csv", "event_logs.json"].map(String::from));
    report.statistics = json!({
        "N": n,
        "level": level,
        "horizon": cfg.t_end,
        "replicas": logs.len(),
        "clean_replicas": clean,
        "fraction_within": fraction,
        "max_abs_z": worst,
    });
    Ok(report)
}
