//! Simulator against the exact stationary law of a tiny capped pool.

use std::path::Path;

use serde_json::json;

use jsq_core::ctmc::{exact_small_oracle, SystemState, Simulator};

use crate::config::Resolved;
use crate::error::Result;
use crate::report::{write_csv, TestReport};

/// Total variation between two probability vectors, the shorter padded with zeros.
pub(crate) fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n).map(|i| (p.get(i).unwrap_or(&0.0) - q.get(i).unwrap_or(&0.0)).abs()).sum::<f64>()
}

pub(super) fn run(cfg: &Resolved, out: &Path) -> Result<TestReport> {
    let params = cfg.params();
    let th = &cfg.thresholds;
    let n = cfg.sizes[0];
    let exact = exact_small_oracle(&params, n, cfg.cap)?;
    let cap = exact.cap;

    // single-queue length law and joint law of the length vector (clipped at the cap)
    let mut exact_single = vec![0.0; cap + 1];
    for (code, p) in exact.probabilities.iter().enumerate() {
        for l in exact.lengths(code) {
            exact_single[l] += p / n as f64;
        }
    }
    let exact_r1 = exact.tail_marginal(1);
    let mut time_r1 = vec![0.0; n + 1];
    let mut time_single = vec![0.0; cap + 2];
    let mut time_joint = vec![0.0; exact.probabilities.len() + 1];
    let mut total_time = 0.0;
    let mut sim = Simulator::new(params, SystemState::empty(n), cfg.seed, 0)?;
    sim.advance_events(cfg.events, |s, hold| {
        total_time += hold;
        time_r1[s.tail_count(1)] += hold;
        let mut code = 0usize;
        let mut outside = false;
        for i in (0..n).rev() {
            let l = s.length(i) as usize;
            time_single[l.min(cap + 1)] += hold / n as f64;
            outside |= l > cap;
            code = code * (cap + 1) + l.min(cap);
        }
        let slot = if outside { time_joint.len() - 1 } else { code };
        time_joint[slot] += hold;
    });
    let emp_single: Vec<f64> = time_single.iter().map(|t| t / total_time).collect();
    let emp_joint: Vec<f64> = time_joint.iter().map(|t| t / total_time).collect();
    let emp_r1: Vec<f64> = time_r1.iter().map(|t| t / total_time).collect();
    let tv_r1 = total_variation(&exact_r1, &emp_r1);
    let tv_single = total_variation(&exact_single, &emp_single);
    let tv_joint = total_variation(&exact.probabilities, &emp_joint);

    let mut report = TestReport::new(cfg);
    report.replica_seeds.push(cfg.seed);
    report.at_least("events_simulated", sim.events() as f64, th.min_events as f64);
    report.at_most("tv_busy_fraction_marginal", tv_r1, th.tv_max);
    report.at_most("tv_queue_length_marginal", tv_single, th.tv_max);
    report.note("tv_joint_length_law", tv_joint, format!("<= {}", th.tv_max), tv_joint <= th.tv_max);
    let imbalance = (exact.arrival_flux - exact.departure_flux).abs() / exact.arrival_flux;
    report.at_most("oracle_flow_balance_relative", imbalance, th.flow_balance);
    report.note("oracle_cap_probability", exact.cap_probability, "reported".into(), true);

    write_csv(
        &out.join("oracle_marginal.csv"),
        &["length", "exact", "simulated"],
        (0..=cap + 1).map(|l| {
            vec![
                l.to_string(),
                exact_single.get(l).copied().unwrap_or(0.0).to_string(),
                emp_single[l].to_string(),
            ]
        }),
    )?;
    report.artifacts.push("oracle_marginal.csv".into());
    report.statistics = json!({
        "N": n,
        "cap": cap,
        "events": sim.events(),
        "simulated_time": total_time,
        "tv_busy_fraction_marginal": tv_r1,
        "busy_count_exact": exact_r1,
        "busy_count_simulated": emp_r1,
        "tv_queue_length_marginal": tv_single,
        "tv_joint_length_law": tv_joint,
        "blocking_probability": exact.blocking_probability,
        "cap_probability": exact.cap_probability,
        "mass_beyond_cap_simulated": emp_single[cap + 1],
        "arrival_flux": exact.arrival_flux,
        "departure_flux": exact.departure_flux,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::total_variation;

    #[test]
    fn total_variation_pads_shorter_vector() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.25, 0.25]), 0.25);
        assert_eq!(total_variation(&[1.0], &[1.0]), 0.0);
    }
}
