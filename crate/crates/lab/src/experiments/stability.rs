//! Global exponential stability in `L2(g_theta)` and order preservation of the ODE flow.

use std::path::Path;

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use jsq_core::model::{integrate_ode, OdeOptions};
use jsq_core::rng::stream_rng;
use jsq_core::spectral::{exponential_stability_check, FlowKind, StabilityOptions};
use jsq_core::{ModelParams, TailVector};

use crate::config::Resolved;
use crate::error::Result;
use crate::report::{write_csv, TestReport};

/// Outcome of integrating one ordered pair `u <= v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairOutcome {
    pub pair: usize,
    /// `min_{t, k} (v_t(k) - u_t(k))` over every emitted step.
    pub min_difference: f64,
    pub preserved: bool,
}

/// Draws `pairs` ordered starts (`v = max(u, w)` for independent random `u`,
/// `w`), integrates both and reports the worst termwise gap.
pub fn ordered_pairs(
    params: &ModelParams,
    level: usize,
    pairs: usize,
    t_end: f64,
    dt: f64,
    slack: f64,
    seed: u64,
) -> Result<Vec<PairOutcome>> {
    let mut rng = stream_rng(seed, 7);
    let opts = OdeOptions::new(params, t_end).with_dt(dt).with_stride(1);
    let mut out = Vec::with_capacity(pairs);
    for pair in 0..pairs {
        let u = random_tail(&mut rng, level)?;
        let w = random_tail(&mut rng, level)?;
        let v = TailVector::new(u.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a.max(*b)).collect())?;
        let tu = integrate_ode(&u, params, &opts)?;
        let tv = integrate_ode(&v, params, &opts)?;
        let min_difference = tu
            .states
            .iter()
            .zip(&tv.states)
            .flat_map(|(a, b)| (1..=level).map(move |k| b.get(k) - a.get(k)))
            .fold(f64::INFINITY, f64::min);
        out.push(PairOutcome { pair, min_difference, preserved: min_difference >= -slack });
    }
    Ok(out)
}

fn random_tail(rng: &mut impl Rng, level: usize) -> Result<TailVector> {
    let mut tail: Vec<f64> = (0..level).map(|_| rng.random::<f64>()).collect();
    tail.sort_by(|a, b| b.total_cmp(a));
    Ok(TailVector::from_tail(&tail)?)
}

pub(super) fn run(cfg: &Resolved, out: &Path) -> Result<TestReport> {
    let params = cfg.params();
    let th = &cfg.thresholds;
    let opts = StabilityOptions { level: Some(cfg.level), ..Default::default() };
    let check = exponential_stability_check(cfg.theta, &params, cfg.trials, cfg.seed, &opts)?;
    let mut report = TestReport::new(cfg);
    report.holds("all_starts_decay", check.all_decay);
    report.above("worst_fitted_rate", check.worst_rate, th.stability_min_rate);

    let nonlinear: Vec<f64> =
        check.trials.iter().filter(|t| t.flow == FlowKind::Nonlinear).map(|t| t.fit.rate).collect();
    let (lo, hi) = nonlinear.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    report.note("nonlinear_rate_spread", hi / lo, "<= 2".into(), hi / lo <= 2.0);
    if let Some(reference) = check.reference_rate {
        if let Some(unit) = check.trial(FlowKind::Linear, "unit") {
            let rel = (unit.fit.rate - reference).abs() / reference;
            report.note("linear_rate_vs_edge_relative", rel, "<= 0.2".into(), rel <= 0.2);
        }
    }

    let pair_horizon = if cfg.t_end > 0.0 { cfg.t_end } else { check.t_end };
    let pairs = ordered_pairs(&params, cfg.level, cfg.pairs, pair_horizon, cfg.dt, th.order_slack, cfg.seed)?;
    let worst = pairs.iter().map(|p| p.min_difference).fold(f64::INFINITY, f64::min);
    report.at_least("ordered_pairs_min_difference", worst, -th.order_slack);

    write_csv(
        &out.join("stability_trials.csv"),
        &["flow", "label", "initial_norm", "rate", "prefactor", "r_squared", "monotone", "converged"],
        check.trials.iter().map(|t| {
            vec![
                format!("{:?}", t.flow).to_lowercase(),
                t.label.clone(),
                t.initial_norm.to_string(),
                t.fit.rate.to_string(),
                t.fit.prefactor.to_string(),
                t.fit.r_squared.to_string(),
                t.fit.monotone.to_string(),
                t.fit.converged.to_string(),
            ]
        }),
    )?;
    write_csv(
        &out.join("stability_pairs.csv"),
        &["pair", "min_difference", "preserved"],
        pairs.iter().map(|p| vec![p.pair.to_string(), p.min_difference.to_string(), p.preserved.to_string()]),
    )?;
    report.artifacts.extend(["stability_trials.csv", "stability_pairs.csv"].map(String::from));
    report.statistics = json!({
        "theta": check.theta,
        "level": check.level,
        "gamma_hat": check.gamma_hat,
        "horizon": check.t_end,
        "reference_rate": check.reference_rate,
        "worst_rate": check.worst_rate,
        "worst_prefactor": check.worst_prefactor,
        "pair_horizon": pair_horizon,
        "pairs_min_difference": worst,
    });
    Ok(report)
}
