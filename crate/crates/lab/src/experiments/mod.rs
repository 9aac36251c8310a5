//! Experiment runners. Each writes its artifacts and `report.json` into its
//! own directory and returns the report.

mod clt;
mod gap;
mod lln;
mod martingale;
mod oracle;
mod stability;

use std::fs;
use std::path::Path;

pub use stability::ordered_pairs;

use crate::config::{ExperimentConfig, Kind, Resolved};
use crate::error::{io_err, Result};
use crate::report::{write_json, KindOutcome, Summary, TestReport};

/// Resolves `cfg`, runs one experiment kind and writes its report.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<TestReport> {
    let resolved = cfg.resolve()?;
    run_resolved(&resolved, out)
}

pub fn run_resolved(cfg: &Resolved, out: &Path) -> Result<TestReport> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let report = match cfg.kind {
        Kind::Lln => lln::run(cfg, out)?,
        Kind::Clt => clt::run(cfg, out)?,
        Kind::Gap => gap::run(cfg, out)?,
        Kind::Stability => stability::run(cfg, out)?,
        Kind::Oracle => oracle::run(cfg, out)?,
        Kind::Martingale => martingale::run(cfg, out)?,
        Kind::All => {
            return Err(crate::error::LabError::Config("use run_all for the batch kind".into()));
        }
    };
    report.write(out)?;
    Ok(report)
}

/// Runs every kind in `out/<kind>`; a failing kind is recorded and the batch
/// moves on.
pub fn run_all(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let base = cfg.resolve()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut kinds = Vec::new();
    for kind in Kind::EXPERIMENTS {
        let mut sub = cfg.for_kind(kind);
        if kind != Kind::Oracle {
            sub.model = cfg.model;
        }
        let dir = out.join(kind.name());
        let outcome = match run_experiment(&sub, &dir) {
            Ok(r) => KindOutcome {
                kind,
                seed: r.seed,
                passed: r.passed,
                directory: kind.name().to_string(),
                report: Some(format!("{}/report.json", kind.name())),
                artifacts: r.artifacts.iter().map(|a| format!("{}/{a}", kind.name())).collect(),
                failed_checks: r.checks.iter().filter(|c| c.gating && !c.passed).map(|c| c.name.clone()).collect(),
                error: None,
            },
            Err(e) => KindOutcome {
                kind,
                seed: base.seed,
                passed: false,
                directory: kind.name().to_string(),
                report: None,
                artifacts: Vec::new(),
                failed_checks: Vec::new(),
                error: Some(e.to_string()),
            },
        };
        eprintln!("{:<11} {}", kind.name(), if outcome.passed { "PASS" } else { "FAIL" });
        kinds.push(outcome);
    }
    let summary = Summary { config_hash: base.hash(), seed: base.seed, passed: kinds.iter().all(|k| k.passed), kinds };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Least-squares rate of `ln(acf)` against lag time over the leading lags
/// where the autocorrelation stays above `floor`. `None` when fewer than
/// three lags qualify.
pub(crate) fn acf_rate(acf: &[f64], spacing: f64, floor: f64) -> Option<(f64, usize)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lag, &c) in acf.iter().enumerate().skip(1) {
        if !(c > floor) {
            break;
        }
        xs.push(lag as f64 * spacing);
        ys.push(c.ln());
    }
    if xs.len() < 3 {
        return None;
    }
    let fit = jsq_core::stats::least_squares(&xs, &ys)?;
    Some((-fit.slope, xs.len()))
}
