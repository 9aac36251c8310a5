//! Spectral gap against equilibrium autocorrelation decay.
//!
//! Three decay rates are compared with `gamma_hat`: the CTMC autocorrelation
//! of `R(1)` (factor-`gap_factor` band, since the series mixes every mode),
//! the analytic OU autocorrelation `(e^{Kt} Sigma)_11 / Sigma_11` at large
//! lags, and the same quantity estimated from a simulated OU path (reported
//! only).

use std::path::Path;

use serde_json::json;

use jsq_core::ctmc::{equilibrium_warmup, map_replicas, Simulator};
use jsq_core::model::fixed_point;
use jsq_core::ou::{gaussian_invariant_sampler, noise_variances, simulate_ou, stationary_covariance, OuOptions};
use jsq_core::rng::replica_seed;
use jsq_core::spectral::{build_operator, matrix_exponential_action, spectral_report};
use jsq_core::stats::autocorrelation;
use jsq_core::CenteredVector;

use super::acf_rate;
use crate::config::Resolved;
use crate::error::Result;
use crate::report::{sample_row, write_csv, write_json, TestReport, SAMPLE_HEADER};

/// Sample spacing of every series, in units of `1 / gamma_hat`.
const SPACING: f64 = 0.25;
/// Default run length in units of `1 / gamma_hat`.
const RUN_LENGTH: f64 = 2000.0;
/// Lags (in units of `1 / gamma_hat`) over which the large-lag OU rate is measured.
const LARGE_LAG: (f64, f64) = (10.0, 20.0);
const MAX_LAG: usize = 200;

pub(super) fn run(cfg: &Resolved, out: &Path) -> Result<TestReport> {
    let params = cfg.params();
    let level = cfg.level;
    let th = &cfg.thresholds;
    let beta = params.beta();
    let spectral = spectral_report(&params, level + 1, 1e-13)?;
    let gamma = spectral.gap.gamma_hat;
    write_json(&out.join("spectral_report.json"), &spectral)?;
    let mut report = TestReport::new(cfg);
    report.artifacts.push("spectral_report.json".into());
    report.above("gamma_hat_positive", gamma, 0.0);
    report.at_most("gamma_hat_at_most_beta", gamma, beta);

    let spacing = SPACING / gamma;
    let t_run = if cfg.t_end > 0.0 { cfg.t_end } else { RUN_LENGTH / gamma };
    let points = (t_run / spacing).floor() as usize;
    let n = cfg.sizes[0];
    let u = fixed_point(&params, level)?;

    // CTMC: R(1) sampled every `spacing` after burn-in, acf averaged over replicas
    let base = replica_seed(cfg.seed, n as u64);
    let series = map_replicas(cfg.replicas, |r| {
        let seed = replica_seed(base, r);
        let state = equilibrium_warmup(&params, n, seed, cfg.t_burn)?;
        let mut sim = Simulator::new(params, state, seed, 1)?;
        let mut xs = Vec::with_capacity(points);
        for i in 1..=points {
            sim.advance(i as f64 * spacing);
            xs.push(sim.state().fraction(1));
        }
        Ok((seed, xs))
    })?;
    let max_lag = MAX_LAG.min(points / 4);
    let mut ctmc_acf = vec![0.0; max_lag + 1];
    for (seed, xs) in &series {
        report.replica_seeds.push(*seed);
        for (a, c) in ctmc_acf.iter_mut().zip(autocorrelation(xs, max_lag)) {
            *a += c / series.len() as f64;
        }
    }
    let ctmc_fit = acf_rate(&ctmc_acf, spacing, th.acf_floor);
    match ctmc_fit {
        Some((rate, _)) => report.within("ctmc_acf_rate", rate, gamma / th.gap_factor, th.gap_factor * beta),
        None => report.holds("ctmc_acf_rate_run_long_enough", false),
    }

    // OU analytic: Cov(Z_t(1), Z_0(1)) = (e^{Kt} Sigma e_1)_1
    let op = build_operator(&params, level)?;
    let nv = noise_variances(&params, level)?;
    let cov = stationary_covariance(&op, &nv)?;
    let col = CenteredVector::new((1..=level).map(|k| cov.get(k, 1)).collect());
    let analytic: Vec<f64> = (0..=max_lag)
        .map(|j| Ok(matrix_exponential_action(&op, &col, j as f64 * spacing)?.get(1) / cov.get(1, 1)))
        .collect::<Result<_>>()?;
    let (c0, c1) = (
        matrix_exponential_action(&op, &col, LARGE_LAG.0 / gamma)?.get(1),
        matrix_exponential_action(&op, &col, LARGE_LAG.1 / gamma)?.get(1),
    );
    let ou_rate = (c0 / c1).ln() / ((LARGE_LAG.1 - LARGE_LAG.0) / gamma);
    report.at_least("ou_analytic_large_lag_rate", ou_rate, gamma * (1.0 - th.ou_rate_slack));

    // OU path by the exact scheme, started in the invariant law
    let ou_seed = replica_seed(cfg.seed, u64::MAX - 1);
    let z0 = gaussian_invariant_sampler(&cov, ou_seed)?.sample();
    let path = simulate_ou(&op, &nv, &z0, &OuOptions::exact(t_run, spacing), replica_seed(ou_seed, 1))?;
    let ou_series: Vec<f64> = path.states.iter().map(|z| z.get(1)).collect();
    let path_acf = autocorrelation(&ou_series, max_lag);
    let path_fit = acf_rate(&path_acf, spacing, th.acf_floor);
    if let Some((rate, _)) = path_fit {
        report.note("ou_path_acf_rate", rate, format!(">= {}", gamma * (1.0 - th.ou_rate_slack)), rate >= gamma * (1.0 - th.ou_rate_slack));
    }

    let acf_rows = (0..=max_lag).map(|j| {
        vec![
            j.to_string(),
            (j as f64 * spacing).to_string(),
            ctmc_acf[j].to_string(),
            analytic[j].to_string(),
            path_acf[j].to_string(),
        ]
    });
    write_csv(&out.join("gap_autocorrelation.csv"), &["lag", "t", "ctmc", "ou_analytic", "ou_path"], acf_rows)?;
    let sn = (n as f64).sqrt();
    let u1 = u.get(1);
    let series_rows = series.iter().flat_map(|(seed, xs)| {
        xs.iter().enumerate().map(move |(i, &r)| {
            sample_row(cfg, n, *seed, (i + 1) as f64 * spacing, 1, r, sn * (r - u1))
        })
    });
    write_csv(&out.join("gap_series.csv"), &SAMPLE_HEADER, series_rows)?;
    let ou_rows = path.times.iter().zip(&path.states).flat_map(|(t, z)| {
        (1..=level).map(move |k| vec![t.to_string(), k.to_string(), z.get(k).to_string()])
    });
    write_csv(&out.join("ou_path.csv"), &["t", "k", "Z"], ou_rows)?;
    write_json(
        &out.join("ou_metadata.json"),
        &json!({
            "K": level,
            "theta": cfg.theta,
            "dt": spacing,
            "t_end": t_run,
            "method": path.method,
            "seeds": { "initial": ou_seed, "path": path.seed },
            "covariance_method": cov.method,
            "lyapunov_residual": cov.residual,
        }),
    )?;
    report.artifacts.extend(
        ["gap_autocorrelation.csv", "gap_series.csv", "ou_path.csv", "ou_metadata.json"].map(String::from),
    );

    report.statistics = json!({
        "gamma_hat": gamma,
        "gamma_extrapolated": spectral.gap.gamma_extrapolated,
        "beta": beta,
        "N": n,
        "spacing": spacing,
        "run_length": t_run,
        "ctmc_acf_rate": ctmc_fit.map(|f| f.0),
        "ctmc_acf_lags_used": ctmc_fit.map(|f| f.1),
        "ou_analytic_large_lag_rate": ou_rate,
        "ou_analytic_window": [LARGE_LAG.0 / gamma, LARGE_LAG.1 / gamma],
        "ou_path_acf_rate": path_fit.map(|f| f.0),
    });
    Ok(report)
}
