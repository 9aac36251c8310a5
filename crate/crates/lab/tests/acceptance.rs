//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Criteria 5 to 9 run the experiment runners with their default
//! configuration and read the verdict from the gating checks they report;
//! tolerances live in [`jsq_lab::Thresholds`].

#[path = "../../core/tests/support/quadrature.rs"]
mod quadrature;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jsq_core::model::{
    correction_a, correction_a_expanded, drift, fixed_point, linearized_drift, remainder_b, remainder_b_bound,
    remainder_h,
};
use jsq_core::ou::{noise_variances, stationary_covariance};
use jsq_core::spectral::{
    build_operator, check_self_adjoint, exponential_stability_check, potential_coefficients, spectral_gap,
    FlowKind, StabilityOptions,
};
use jsq_core::{ModelParams, TailVector};
use jsq_lab::config::{ExperimentConfig, Kind};
use jsq_lab::{run_experiment, TestReport};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("fixed point", Duration::from_secs(1), fixed_point_criterion),
        ("identity suite", Duration::from_secs(10), identity_criterion),
        ("spectral", Duration::from_secs(30), spectral_criterion),
        ("covariance", Duration::from_secs(30), covariance_criterion),
        ("small-instance oracle", Duration::from_secs(120), oracle_criterion),
        ("LLN at desk scale", Duration::from_secs(600), lln_criterion),
        ("CLT at desk scale", Duration::from_secs(1800), clt_criterion),
        ("martingale bracket", Duration::from_secs(300), martingale_criterion),
        ("stability and monotonicity", Duration::from_secs(120), stability_criterion),
        ("determinism", Duration::from_secs(600), determinism_criterion),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let on_time = elapsed <= *budget;
        let passed = out.passed && on_time;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {name}: {}  ({:.2}s of {}s budget) {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn fixed_point_criterion() -> Outcome {
    let mut worst = 0.0f64;
    let mut exact_first = true;
    for l in 1..=4 {
        for rho in [0.5, 0.9, 0.99] {
            let p = ModelParams::with_load(rho, l).unwrap();
            let k = p.default_truncation().unwrap();
            let u = fixed_point(&p, k).unwrap();
            worst = worst.max(drift(&u, &p).unwrap().sup_norm());
            exact_first &= u.get(1) == rho;
        }
    }
    let p = ModelParams::with_load(0.5, 2).unwrap();
    let u = fixed_point(&p, p.default_truncation().unwrap()).unwrap();
    let expected = [1.0, 0.5, 0.125, 0.0078125, 3.0517578125e-5, 4.656612873077393e-10];
    let rel = expected.iter().enumerate().map(|(k, e)| (u.get(k) - e).abs() / e).fold(0.0, f64::max);
    outcome(
        worst < 1e-12 && exact_first && rel <= 1e-15,
        format!("sup|F(u~)| = {worst:.2e}, u~(1) == rho: {exact_first}, L=2 rho=0.5 rel err {rel:.1e}"),
    )
}

fn identity_criterion() -> Outcome {
    let mut falling = 0.0f64;
    let mut lattice_max = f64::NEG_INFINITY;
    for n in 2..=20 {
        for l in 1..=n {
            for i in 0..=100 {
                let a = i as f64 / 100.0;
                falling = falling.max((correction_a(a, n, l) - correction_a_expanded(a, n, l)).abs());
            }
            for j in 0..=n {
                lattice_max = lattice_max.max(correction_a(j as f64 / n as f64, n, l));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut b_identity = 0.0f64;
    let mut b_bounds = true;
    for l in 1..=6 {
        for _ in 0..2000 {
            let a: f64 = rng.random();
            let h = rng.random::<f64>() - a;
            let li = l as i32;
            let direct = (a + h).powi(li) - a.powi(li) - l as f64 * a.powi(li - 1) * h;
            let b = remainder_b(a, h, l);
            b_identity = b_identity.max((b - direct).abs());
            if l >= 2 {
                b_bounds &= b >= -1e-15 && b <= remainder_b_bound(a, h, l) + 1e-15;
            }
        }
    }
    let mut decomposition = 0.0f64;
    for trial in 0..1000 {
        let l = 1 + trial % 4;
        let p = ModelParams::new(rng.random_range(0.1..2.0), rng.random_range(0.5..2.0), l).unwrap();
        let level = rng.random_range(2..12);
        let v = random_tail(&mut rng, level);
        let w = random_tail(&mut rng, level);
        let x = w.centered_at(&v).unwrap();
        let lhs = drift(&w, &p).unwrap();
        let base = drift(&v, &p).unwrap();
        let kx = linearized_drift(&v, &x, &p).unwrap();
        let h = remainder_h(&v, &x, &p).unwrap();
        for k in 1..=level {
            decomposition = decomposition.max((lhs.get(k) - base.get(k) - kx.get(k) - h.get(k)).abs());
        }
    }
    outcome(
        falling <= 1e-12 && lattice_max <= 1e-15 && b_identity <= 1e-12 && b_bounds && decomposition <= 1e-12,
        format!(
            "falling-factorial {falling:.1e}, max A on lattice {lattice_max:.1e}, B identity {b_identity:.1e}, \
             B bounds {b_bounds}, decomposition {decomposition:.1e}"
        ),
    )
}

fn random_tail(rng: &mut impl Rng, level: usize) -> TailVector {
    let mut tail: Vec<f64> = (0..level).map(|_| rng.random::<f64>()).collect();
    tail.sort_by(|a, b| b.total_cmp(a));
    TailVector::from_tail(&tail).unwrap()
}

fn spectral_criterion() -> Outcome {
    let mut balance = 0.0f64;
    let mut asymmetry = 0.0f64;
    let mut interlacing = true;
    let mut in_range = true;
    let mut oracle = 0.0f64;
    for l in 1..=4 {
        for rho in [0.5, 0.9] {
            let p = ModelParams::with_load(rho, l).unwrap();
            let op = build_operator(&p, 29).unwrap();
            let pi = potential_coefficients(&op).unwrap();
            balance = balance.max(pi.detailed_balance_residual(&op));
            asymmetry = asymmetry.max(check_self_adjoint(&op, &pi).unwrap());
            let g = spectral_gap(&p, 30, 1e-13).unwrap();
            interlacing &= g.interlacing && g.monotone;
            in_range &= g.gamma_hat > 0.0 && g.gamma_hat <= p.beta();
            oracle = oracle.max(g.oracle_relative_error);
        }
    }
    let p = ModelParams::with_load(0.5, 1).unwrap();
    let check = exponential_stability_check(0.5, &p, 0, 3, &StabilityOptions::default()).unwrap();
    let reference = check.reference_rate.unwrap();
    let rate = check.trial(FlowKind::Linear, "unit").unwrap().fit.rate;
    let rel = (rate - reference).abs() / reference;
    outcome(
        balance <= 1e-14 && asymmetry < 1e-12 && interlacing && in_range && oracle <= 1e-6 && rel <= 0.2,
        format!(
            "balance {balance:.1e}, asymmetry {asymmetry:.1e}, interlacing {interlacing}, gap in (0, beta] {in_range}, \
             oracle {oracle:.1e}, L=1 rate {rate:.4} vs {reference:.4} ({:.1}%)",
            100.0 * rel
        ),
    )
}

fn covariance_criterion() -> Outcome {
    let mut residual = 0.0f64;
    let mut floor = f64::INFINITY;
    for l in 1..=4 {
        for rho in [0.5, 0.9] {
            let p = ModelParams::with_load(rho, l).unwrap();
            let k = p.default_truncation().unwrap();
            let cov = stationary_covariance(&build_operator(&p, k).unwrap(), &noise_variances(&p, k).unwrap()).unwrap();
            residual = residual.max(cov.residual);
            floor = floor.min(cov.min_eigenvalue);
        }
    }
    let p = ModelParams::with_load(0.9, 2).unwrap();
    let k = p.default_truncation().unwrap();
    let op = build_operator(&p, k).unwrap();
    let nv = noise_variances(&p, k).unwrap();
    let cov = stationary_covariance(&op, &nv).unwrap();
    let gamma = spectral_gap(&p, k + 1, 1e-13).unwrap().gamma_hat;
    let quad = quadrature::quadrature_covariance(&op, &nv, 40.0 / gamma, 1e-10);
    let rel = cov.sigma.iter().zip(quad.iter()).map(|(a, b)| (a - b).abs() / b.abs()).fold(0.0, f64::max);
    outcome(
        residual < 1e-10 && floor >= -1e-12 && rel <= 1e-6,
        format!("Lyapunov residual {residual:.1e}, min eigenvalue {floor:.1e}, quadrature rel err {rel:.1e} (K = {k})"),
    )
}

fn run_kind(kind: Kind, dir: &Path) -> Result<TestReport, String> {
    run_experiment(&ExperimentConfig::new(kind), dir).map_err(|e| e.to_string())
}

/// Verdict from the named gating checks of a default run.
fn from_report(kind: Kind, names: &[&str]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    match run_kind(kind, dir.path()) {
        Err(e) => outcome(false, format!("run failed: {e}")),
        Ok(r) => {
            let mut ok = true;
            let mut parts = Vec::new();
            for name in names {
                match r.check(name) {
                    Some(c) => {
                        ok &= c.passed;
                        parts.push(format!("{name} = {:.4e} ({})", c.value, c.threshold));
                    }
                    None => {
                        ok = false;
                        parts.push(format!("{name} missing"));
                    }
                }
            }
            outcome(ok, parts.join(", "))
        }
    }
}

fn oracle_criterion() -> Outcome {
    from_report(Kind::Oracle, &["events_simulated", "tv_busy_fraction_marginal", "tv_queue_length_marginal"])
}

fn lln_criterion() -> Outcome {
    from_report(Kind::Lln, &["equilibrium_error_strictly_decreasing", "equilibrium_log_log_slope"])
}

fn clt_criterion() -> Outcome {
    from_report(Kind::Clt, &["ks_p_value_z1", "covariance_max_abs_z"])
}

fn martingale_criterion() -> Outcome {
    from_report(Kind::Martingale, &["fraction_replicas_within_z"])
}

fn stability_criterion() -> Outcome {
    from_report(Kind::Stability, &["all_starts_decay", "worst_fitted_rate", "ordered_pairs_min_difference"])
}

/// Reruns quick kinds twice, with different worker counts, and compares CSV bytes.
fn determinism_criterion() -> Outcome {
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for kind in [Kind::Martingale, Kind::Stability, Kind::Lln, Kind::Oracle] {
        let mut cfg = ExperimentConfig::new(kind);
        if kind == Kind::Oracle {
            cfg.events = Some(1_000_000);
        }
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for (dir, workers) in dirs.iter().zip([1, 3]) {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
            if let Err(e) = pool.install(|| run_experiment(&cfg, dir.path())) {
                return outcome(false, format!("{} failed: {e}", kind.name()));
            }
        }
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
            .unwrap()
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        for name in names {
            compared += 1;
            let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&name)).ok();
            if b.as_deref() != Some(a.as_slice()) {
                mismatched.push(name.to_string_lossy().into_owned());
            }
        }
    }
    outcome(
        mismatched.is_empty() && compared > 0,
        format!("{compared} CSV files compared across worker counts 1 and 3, mismatches: {mismatched:?}"),
    )
}
