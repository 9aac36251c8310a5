//! Experiment configuration: one JSON document per run.
//!
//! Every field except `kind` may be omitted; omitted values are filled with
//! per-kind defaults by [`ExperimentConfig::resolve`]. The resolved document
//! is what gets hashed, so two configs that differ only in spelled-out
//! defaults share a hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use jsq_core::ModelParams;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Lln,
    Clt,
    Gap,
    Stability,
    Oracle,
    Martingale,
    All,
}

impl Kind {
    pub const EXPERIMENTS: [Kind; 6] =
        [Kind::Lln, Kind::Clt, Kind::Gap, Kind::Stability, Kind::Oracle, Kind::Martingale];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Lln => "lln",
            Kind::Clt => "clt",
            Kind::Gap => "gap",
            Kind::Stability => "stability",
            Kind::Oracle => "oracle",
            Kind::Martingale => "martingale",
            Kind::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    pub beta: f64,
    pub choices: usize,
}

impl ModelConfig {
    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.alpha, self.beta, self.choices)?)
    }
}

/// Pass/fail thresholds; every gating comparison in a report reads from here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Level of each goodness-of-fit test.
    pub test_level: f64,
    /// Divide `test_level` by the number of tested coordinates.
    pub bonferroni: bool,
    /// Coordinates with `N u~(k)` below this are too coarse a lattice for KS.
    pub min_mean_count: f64,
    /// Width, in standard errors, of covariance and correlation bands.
    pub covariance_se: f64,
    pub lln_slope_min: f64,
    pub lln_slope_max: f64,
    /// Width, in standard errors, of the transient bands around the ODE.
    pub lln_band_se: f64,
    /// Extra allowance `c / N` in the transient bands for the `O(1/N)` bias.
    pub lln_bias_allowance: f64,
    /// Autocorrelation rate must lie in `[gamma_hat / f, f beta]`.
    pub gap_factor: f64,
    /// Relative slack `eps` in `rate >= gamma_hat (1 - eps)` for the OU autocorrelation.
    pub ou_rate_slack: f64,
    /// Autocorrelation decay rates are fitted over the leading lags above this value.
    pub acf_floor: f64,
    pub stability_min_rate: f64,
    pub order_slack: f64,
    pub tv_max: f64,
    pub min_events: u64,
    /// Relative mismatch allowed between arrival and departure flux of the oracle.
    pub flow_balance: f64,
    pub martingale_z: f64,
    pub martingale_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            test_level: 0.01,
            bonferroni: true,
            min_mean_count: 100.0,
            covariance_se: 3.0,
            lln_slope_min: -0.7,
            lln_slope_max: -0.3,
            lln_band_se: 4.0,
            lln_bias_allowance: 1.0,
            gap_factor: 2.0,
            ou_rate_slack: 0.05,
            acf_floor: 0.1,
            stability_min_rate: 0.0,
            order_slack: 1e-9,
            tv_max: 0.01,
            min_events: 10_000_000,
            flow_balance: 1e-12,
            martingale_z: 4.0,
            martingale_fraction: 0.95,
        }
    }
}

/// Configuration as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    /// Pool sizes `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Replica count `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    /// Truncation level `K`; the `u~(K) < 1e-16` rule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Weight parameter of `L2(g_theta)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_burn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Random starts (stability) or ordered pairs are `trials` and `pairs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Event budget of the oracle comparison run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    /// Buffer cap of the exact oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// Fully specified configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub kind: Kind,
    pub model: ModelConfig,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub level: usize,
    pub theta: f64,
    /// `None` means the default burn-in `10 / gamma_hat`.
    pub t_burn: Option<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub trials: usize,
    pub pairs: usize,
    pub events: u64,
    pub cap: usize,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            model: None,
            sizes: None,
            replicas: None,
            level: None,
            theta: None,
            t_burn: None,
            t_end: None,
            dt: None,
            seed: None,
            output_dir: None,
            trials: None,
            pairs: None,
            events: None,
            cap: None,
            thresholds: Thresholds::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The same document retargeted at another experiment kind, keeping
    /// only the fields shared by every kind.
    pub fn for_kind(&self, kind: Kind) -> Self {
        let mut c = ExperimentConfig::new(kind);
        c.seed = self.seed;
        c.thresholds = self.thresholds;
        c.output_dir = self.output_dir.clone();
        c
    }

    /// Fills per-kind defaults and validates.
    pub fn resolve(&self) -> Result<Resolved> {
        let kind = self.kind;
        let model = self.model.unwrap_or(match kind {
            Kind::Oracle => ModelConfig { alpha: 0.5, beta: 1.0, choices: 2 },
            _ => ModelConfig { alpha: 0.9, beta: 1.0, choices: 2 },
        });
        let params = model.params()?;
        let rho = params.rho();
        if rho >= 1.0 && kind != Kind::Oracle {
            return Err(LabError::Config(format!("load rho = {rho} must be below 1 for {}", kind.name())));
        }
        let sizes = self.sizes.clone().unwrap_or_else(|| match kind {
            Kind::Lln => vec![100, 1_000, 10_000],
            Kind::Clt => vec![100, 10_000],
            Kind::Gap | Kind::Martingale => vec![1_000],
            Kind::Oracle => vec![2],
            Kind::Stability | Kind::All => vec![1_000],
        });
        if sizes.is_empty() {
            return Err(LabError::Config("the N grid is empty".into()));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < model.choices) {
            return Err(LabError::Config(format!("pool size {n} is below the choice count {}", model.choices)));
        }
        let replicas = self.replicas.unwrap_or(match kind {
            Kind::Lln => 20,
            Kind::Clt => 200,
            Kind::Martingale => 100,
            _ => 2,
        });
        if replicas < 2 {
            return Err(LabError::Config("statistical tests need at least 2 replicas".into()));
        }
        if kind == Kind::Clt && replicas < 100 {
            return Err(LabError::Config(format!("the CLT experiment needs at least 100 replicas, got {replicas}")));
        }
        let level = match self.level {
            Some(k) if k >= 2 => k,
            Some(k) => return Err(LabError::Config(format!("level K must be at least 2, got {k}"))),
            None => params.default_truncation().unwrap_or(2),
        };
        let theta = self.theta.unwrap_or(if model.choices == 1 { 0.5 * (rho + 1.0) } else { rho });
        if !(theta > 0.0 && theta < 1.0) {
            return Err(LabError::Config(format!("theta must lie in (0, 1), got {theta}")));
        }
        if kind == Kind::Stability && theta < rho {
            return Err(LabError::Config(format!("theta = {theta} must be at least rho = {rho}")));
        }
        let t_end = self.t_end.unwrap_or(match kind {
            Kind::Lln | Kind::Martingale => 20.0,
            _ => 0.0,
        });
        let dt = self.dt.unwrap_or(0.01 / model.beta);
        for (name, value) in [("t_end", Some(t_end)), ("dt", Some(dt)), ("t_burn", self.t_burn)] {
            if let Some(v) = value {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(LabError::Config(format!("{name} must be finite and nonnegative, got {v}")));
                }
            }
        }
        if !(dt > 0.0) {
            return Err(LabError::Config("dt must be positive".into()));
        }
        let cap = self.cap.unwrap_or(8);
        if kind == Kind::Oracle && (sizes[0] > 3 || cap > 8 || cap == 0) {
            return Err(LabError::Config("the exact oracle needs N <= 3 and 1 <= cap <= 8".into()));
        }
        let t = &self.thresholds;
        if !(t.test_level > 0.0 && t.test_level < 1.0) || t.lln_slope_min > t.lln_slope_max || t.gap_factor < 1.0 {
            return Err(LabError::Config("thresholds out of range".into()));
        }
        Ok(Resolved {
            kind,
            model,
            sizes,
            replicas,
            level,
            theta,
            t_burn: self.t_burn,
            t_end,
            dt,
            seed: self.seed.unwrap_or(20_240_601),
            trials: self.trials.unwrap_or(10),
            pairs: self.pairs.unwrap_or(100),
            events: self.events.unwrap_or(t.min_events),
            cap,
            thresholds: *t,
        })
    }
}

impl Resolved {
    pub fn params(&self) -> ModelParams {
        self.model.params().expect("validated during resolution")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_kind() {
        let r = ExperimentConfig::new(Kind::Clt).resolve().unwrap();
        assert_eq!(r.sizes, vec![100, 10_000]);
        assert_eq!(r.replicas, 200);
        assert_eq!(r.level, 9);
        assert_eq!(r.theta, 0.9);
        let o = ExperimentConfig::new(Kind::Oracle).resolve().unwrap();
        assert_eq!(o.model.alpha, 0.5);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut c = ExperimentConfig::new(Kind::Lln);
        c.sizes = Some(vec![]);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"kind": "lln", "size": [10]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "lln", "sizes": [10]}"#).is_ok());
    }

    #[test]
    fn hash_ignores_output_dir_and_spelled_out_defaults() {
        let a = ExperimentConfig::new(Kind::Gap);
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        b.replicas = Some(2);
        assert_eq!(a.resolve().unwrap().hash(), b.resolve().unwrap().hash());
        b.seed = Some(5);
        assert_ne!(a.resolve().unwrap().hash(), b.resolve().unwrap().hash());
    }

    #[test]
    fn unstable_load_is_rejected() {
        let mut c = ExperimentConfig::new(Kind::Clt);
        c.model = Some(ModelConfig { alpha: 1.0, beta: 1.0, choices: 2 });
        assert!(c.resolve().is_err());
    }
}
