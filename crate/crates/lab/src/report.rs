//! Test reports, run manifests and the files that back them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Kind, Resolved};
use crate::error::{io_err, Result};

/// One comparison of a computed statistic against a declared threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance region, e.g. `"> 0.01"`.
    pub threshold: String,
    pub passed: bool,
    /// Non-gating checks are reported but do not affect [`TestReport::passed`].
    pub gating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: Kind,
    pub config_hash: String,
    pub seed: u64,
    /// Derived seeds of every replica, in replica order per pool size.
    pub replica_seeds: Vec<u64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub statistics: serde_json::Value,
    /// File names relative to the run directory.
    pub artifacts: Vec<String>,
}

impl TestReport {
    pub fn new(cfg: &Resolved) -> Self {
        Self {
            kind: cfg.kind,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            replica_seeds: Vec::new(),
            checks: Vec::new(),
            passed: true,
            statistics: serde_json::Value::Null,
            artifacts: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, value: f64, threshold: String, passed: bool, gating: bool) {
        self.checks.push(Check { name: name.to_string(), value, threshold, passed, gating });
        if gating && !passed {
            self.passed = false;
        }
    }

    /// Gating check `value <= bound`.
    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value, format!("<= {bound}"), value <= bound, true);
    }

    /// Gating check `value >= bound`.
    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value, format!(">= {bound}"), value >= bound, true);
    }

    /// Gating check `value > bound`.
    pub fn above(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value, format!("> {bound}"), value > bound, true);
    }

    /// Gating check `lo <= value <= hi`.
    pub fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.push(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi, true);
    }

    /// Gating check on a boolean outcome, recorded as 1 or 0.
    pub fn holds(&mut self, name: &str, ok: bool) {
        self.push(name, if ok { 1.0 } else { 0.0 }, "== 1".into(), ok, true);
    }

    /// Reported, non-gating outcome.
    pub fn note(&mut self, name: &str, value: f64, threshold: String, ok: bool) {
        self.push(name, value, threshold, ok, false);
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{} [{verdict}]  seed {}  config {}", self.kind.name(), self.seed, &self.config_hash[..12]);
        for c in &self.checks {
            let mark = match (c.passed, c.gating) {
                (true, _) => "ok  ",
                (false, true) => "FAIL",
                (false, false) => "warn",
            };
            let _ = writeln!(s, "  {mark} {:<40} {:>14.6e}  {}", c.name, c.value, c.threshold);
        }
        if !self.artifacts.is_empty() {
            let _ = writeln!(s, "  artifacts: {}", self.artifacts.join(", "));
        }
        s
    }
}

/// Outcome of one kind inside a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindOutcome {
    pub kind: Kind,
    pub seed: u64,
    pub passed: bool,
    pub directory: String,
    pub report: Option<String>,
    pub artifacts: Vec<String>,
    pub failed_checks: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub kinds: Vec<KindOutcome>,
}

impl Summary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "batch [{}]  seed {}", if self.passed { "PASS" } else { "FAIL" }, self.seed);
        for k in &self.kinds {
            let why = match (&k.error, k.failed_checks.is_empty()) {
                (Some(e), _) => format!("error: {e}"),
                (None, false) => format!("failed: {}", k.failed_checks.join(", ")),
                (None, true) => String::new(),
            };
            let _ = writeln!(s, "  {:<11} {}  {}", k.kind.name(), if k.passed { "PASS" } else { "FAIL" }, why);
        }
        s
    }
}

/// Renders either a report or a batch summary file.
pub fn render_file(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    if let Ok(summary) = serde_json::from_str::<Summary>(&text) {
        return Ok(summary.render());
    }
    Ok(serde_json::from_str::<TestReport>(&text)?.render())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes a CSV file from a header and string rows.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Column layout shared by every per-replica sample file.
pub const SAMPLE_HEADER: [&str; 9] = ["N", "L", "alpha", "beta", "seed", "t", "k", "R", "Z"];

/// One row in [`SAMPLE_HEADER`] layout.
#[allow(clippy::too_many_arguments)]
pub fn sample_row(cfg: &Resolved, n: usize, seed: u64, t: f64, k: usize, r: f64, z: f64) -> Vec<String> {
    vec![
        n.to_string(),
        cfg.model.choices.to_string(),
        cfg.model.alpha.to_string(),
        cfg.model.beta.to_string(),
        seed.to_string(),
        t.to_string(),
        k.to_string(),
        r.to_string(),
        z.to_string(),
    ]
}
