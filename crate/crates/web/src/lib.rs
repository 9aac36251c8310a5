//! WebAssembly bindings behind the static page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs nothing beyond `JSON.parse`. The `*_json` functions hold the logic
//! and are ordinary Rust, which keeps them testable off the browser.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use jsq_core::model::{fixed_point, integrate_ode, OdeOptions};
use jsq_core::ou::{gaussian_invariant_sampler, noise_variances, simulate_ou, stationary_covariance, OuOptions};
use jsq_core::spectral::{build_operator, spectral_report};
use jsq_core::{ModelParams, TailVector};

/// Largest truncation the page will build; keeps dense work interactive.
const MAX_LEVEL: usize = 60;

#[derive(Debug, thiserror::Error)]
pub enum WebError {
    #[error(transparent)]
    Model(#[from] jsq_core::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Input(String),
}

type Result<T> = std::result::Result<T, WebError>;

fn stable_params(alpha: f64, beta: f64, choices: usize) -> Result<(ModelParams, usize)> {
    let p = ModelParams::new(alpha, beta, choices)?;
    p.require_stable()?;
    Ok((p, p.default_truncation()?.min(MAX_LEVEL)))
}

#[derive(Serialize)]
struct Relaxation {
    level: usize,
    fixed_point: Vec<f64>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    sup_distance: Vec<f64>,
}

/// Mean-field ODE from the empty system, sampled at `samples + 1` even times.
pub fn relaxation_json(alpha: f64, beta: f64, choices: usize, t_end: f64, samples: usize) -> Result<String> {
    let (p, level) = stable_params(alpha, beta, choices)?;
    if !(t_end > 0.0 && t_end.is_finite()) || samples == 0 || samples > 2000 {
        return Err(WebError::Input("need t_end > 0 and 1 <= samples <= 2000".into()));
    }
    let u = fixed_point(&p, level)?;
    let opts = OdeOptions::new(&p, t_end);
    let opts = opts.with_stride(((t_end / opts.dt / samples as f64).round() as usize).max(1));
    let traj = integrate_ode(&TailVector::empty(level)?, &p, &opts)?;
    let sup_distance = traj
        .states
        .iter()
        .map(|s| (1..=level).map(|k| (s.get(k) - u.get(k)).abs()).fold(0.0, f64::max))
        .collect();
    let out = Relaxation {
        level,
        fixed_point: u.as_slice().to_vec(),
        times: traj.times.clone(),
        states: traj.states.iter().map(|s| s.as_slice().to_vec()).collect(),
        sup_distance,
    };
    Ok(serde_json::to_string(&out)?)
}

/// Spectral diagnostics: polynomial zeros per degree, the gap estimate and
/// the dense eigenvalue check.
pub fn spectrum_json(alpha: f64, beta: f64, choices: usize) -> Result<String> {
    let (p, level) = stable_params(alpha, beta, choices)?;
    Ok(serde_json::to_string(&spectral_report(&p, level + 1, 1e-13)?)?)
}

#[derive(Serialize)]
struct Fluctuations {
    level: usize,
    covariance: Vec<Vec<f64>>,
    times: Vec<f64>,
    path: Vec<Vec<f64>>,
    seed: u64,
    dt: f64,
}

/// Stationary covariance and one exact OU path started from the invariant law.
pub fn fluctuations_json(alpha: f64, beta: f64, choices: usize, t_end: f64, dt: f64, seed: u64) -> Result<String> {
    let (p, level) = stable_params(alpha, beta, choices)?;
    if !(dt > 0.0) || !(t_end > 0.0) || t_end / dt > 1e5 {
        return Err(WebError::Input("need dt > 0, t_end > 0 and at most 1e5 steps".into()));
    }
    let op = build_operator(&p, level)?;
    let nv = noise_variances(&p, level)?;
    let cov = stationary_covariance(&op, &nv)?;
    let z0 = gaussian_invariant_sampler(&cov, seed)?.sample();
    let path = simulate_ou(&op, &nv, &z0, &OuOptions::exact(t_end, dt), seed.wrapping_add(1))?;
    let out = Fluctuations {
        level,
        covariance: cov.rows(),
        times: path.times.clone(),
        path: path.states.iter().map(|z| z.as_slice().to_vec()).collect(),
        seed,
        dt,
    };
    Ok(serde_json::to_string(&out)?)
}

fn to_js<T>(r: Result<T>) -> std::result::Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn relaxation(alpha: f64, beta: f64, choices: usize, t_end: f64, samples: usize) -> std::result::Result<String, JsValue> {
    to_js(relaxation_json(alpha, beta, choices, t_end, samples))
}

#[wasm_bindgen]
pub fn spectrum(alpha: f64, beta: f64, choices: usize) -> std::result::Result<String, JsValue> {
    to_js(spectrum_json(alpha, beta, choices))
}

#[wasm_bindgen]
pub fn fluctuations(
    alpha: f64,
    beta: f64,
    choices: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(fluctuations_json(alpha, beta, choices, t_end, dt, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn relaxation_approaches_fixed_point() {
        let v: Value = serde_json::from_str(&relaxation_json(0.9, 1.0, 2, 200.0, 50).unwrap()).unwrap();
        let d = v["sup_distance"].as_array().unwrap();
        assert!(d.first().unwrap().as_f64().unwrap() > 0.5);
        assert!(d.last().unwrap().as_f64().unwrap() < 1e-4);
        assert_eq!(v["level"], 9);
    }

    #[test]
    fn spectrum_reports_gap() {
        let v: Value = serde_json::from_str(&spectrum_json(0.9, 1.0, 2).unwrap()).unwrap();
        let g = v["gap"]["gamma_hat"].as_f64().unwrap();
        assert!((g - 0.07547).abs() < 1e-4, "{g}");
    }

    #[test]
    fn fluctuations_has_symmetric_covariance() {
        let v: Value = serde_json::from_str(&fluctuations_json(0.7, 1.0, 2, 5.0, 0.5, 3).unwrap()).unwrap();
        let c = v["covariance"].as_array().unwrap();
        assert_eq!(c[0][1], c[1][0]);
        assert_eq!(v["path"].as_array().unwrap().len(), 11);
    }

    #[test]
    fn unstable_load_is_rejected() {
        assert!(spectrum_json(1.2, 1.0, 2).is_err());
        assert!(relaxation_json(0.5, 1.0, 2, -1.0, 10).is_err());
    }
}
