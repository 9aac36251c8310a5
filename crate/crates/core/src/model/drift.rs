use super::identities::remainder_b;
use super::{check_dims, CenteredVector, ModelParams, TailVector};
use crate::error::{Error, Result};

/// Tolerance used to decide that `N v(k)` is an integer.
const LATTICE_TOL: f64 = 1e-9;

/// Arrival part `F+(v)(k) = alpha (v(k-1)^L - v(k)^L)`.
pub fn drift_plus(v: &TailVector, params: &ModelParams) -> CenteredVector {
    let mut out = vec![0.0; v.level()];
    plus_into(v.as_slice(), params, &mut out);
    CenteredVector::new(out)
}

/// Service part `F-(v)(k) = beta (v(k) - v(k+1))`, linear, with `v(K+1) = 0`.
pub fn drift_minus(v: &TailVector, params: &ModelParams) -> CenteredVector {
    let mut out = vec![0.0; v.level()];
    minus_into(v.as_slice(), params, &mut out);
    CenteredVector::new(out)
}

/// Mean-field drift `F = F+ - F-` on indices `1..=K`.
pub fn drift(v: &TailVector, params: &ModelParams) -> Result<CenteredVector> {
    if v.level() < 1 {
        return Err(Error::Truncation { min: 1, got: v.level() });
    }
    let mut out = vec![0.0; v.level()];
    drift_into(v.as_slice(), params, &mut out);
    Ok(CenteredVector::new(out))
}

/// Raw drift on `v(0..=K)`, writing `F(v)(1..=K)` into `out`.
pub(crate) fn drift_into(v: &[f64], params: &ModelParams, out: &mut [f64]) {
    let level = v.len() - 1;
    let l = params.choices() as i32;
    let (alpha, beta) = (params.alpha(), params.beta());
    let mut prev_pow = v[0].powi(l);
    for k in 1..=level {
        let pow = v[k].powi(l);
        let next = if k < level { v[k + 1] } else { 0.0 };
        out[k - 1] = alpha * (prev_pow - pow) - beta * (v[k] - next);
        prev_pow = pow;
    }
}

fn plus_into(v: &[f64], params: &ModelParams, out: &mut [f64]) {
    let l = params.choices() as i32;
    for k in 1..v.len() {
        out[k - 1] = params.alpha() * (v[k - 1].powi(l) - v[k].powi(l));
    }
}

fn minus_into(v: &[f64], params: &ModelParams, out: &mut [f64]) {
    let level = v.len() - 1;
    for k in 1..=level {
        let next = if k < level { v[k + 1] } else { 0.0 };
        out[k - 1] = params.beta() * (v[k] - next);
    }
}

/// Falling factorial `(x)_n = x (x - 1) ... (x - n + 1)`.
pub fn falling_factorial(x: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (x - i as f64))
}

fn lattice_counts(v: &TailVector, n: usize) -> Result<Vec<f64>> {
    let nf = n as f64;
    v.as_slice()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let scaled = x * nf;
            let rounded = scaled.round();
            if (scaled - rounded).abs() > LATTICE_TOL * nf.max(1.0) {
                Err(Error::NotOnLattice(format!("N v({k}) = {scaled} is not an integer")))
            } else {
                Ok(rounded)
            }
        })
        .collect()
}

/// Finite-`N` arrival drift `alpha ((N v(k-1))_L - (N v(k))_L) / (N)_L`.
///
/// This is the exact up-jump intensity of `R^N(k)`, divided by `N`, when the
/// `L` queues are drawn without replacement.
pub fn drift_plus_finite_n(v: &TailVector, params: &ModelParams, n: usize) -> Result<CenteredVector> {
    let l = params.choices();
    if n < l {
        return Err(Error::InvalidArgument(format!("system size N = {n} is below L = {l}")));
    }
    let counts = lattice_counts(v, n)?;
    let denom = falling_factorial(n as f64, l);
    let out = (1..counts.len())
        .map(|k| {
            params.alpha() * (falling_factorial(counts[k - 1], l) - falling_factorial(counts[k], l))
                / denom
        })
        .collect();
    Ok(CenteredVector::new(out))
}

/// Finite-`N` drift `F^N = F^N+ - F-` of an empirical tail vector.
pub fn drift_finite_n(v: &TailVector, params: &ModelParams, n: usize) -> Result<CenteredVector> {
    let plus = drift_plus_finite_n(v, params, n)?;
    let minus = drift_minus(v, params);
    Ok(CenteredVector::new(
        plus.as_slice().iter().zip(minus.as_slice()).map(|(a, b)| a - b).collect(),
    ))
}

/// Linearization of the drift at a general center `v`:
///
/// `K(v)x(k) = alpha L v(k-1)^(L-1) x(k-1) - (alpha L v(k)^(L-1) + beta) x(k) + beta x(k+1)`
///
/// with `x(0) = 0` and `x(K+1) = 0`.
pub fn linearized_drift(
    v: &TailVector,
    x: &CenteredVector,
    params: &ModelParams,
) -> Result<CenteredVector> {
    check_dims(v.level(), x.level())?;
    let level = v.level();
    let l = params.choices();
    let (alpha, beta) = (params.alpha(), params.beta());
    let lf = l as f64;
    let slope = |a: f64| alpha * lf * a.powi(l as i32 - 1);
    let out = (1..=level)
        .map(|k| {
            slope(v.get(k - 1)) * x.get(k - 1) - (slope(v.get(k)) + beta) * x.get(k)
                + beta * x.get(k + 1)
        })
        .collect();
    Ok(CenteredVector::new(out))
}

/// Second-order remainder `H(v,x)(k) = alpha B(v(k-1), x(k-1)) - alpha B(v(k), x(k))`,
/// so that `F(v + x) - F(v) = K(v)x + H(v,x)`.
pub fn remainder_h(v: &TailVector, x: &CenteredVector, params: &ModelParams) -> Result<CenteredVector> {
    check_dims(v.level(), x.level())?;
    let l = params.choices();
    let alpha = params.alpha();
    let out = (1..=v.level())
        .map(|k| {
            alpha * remainder_b(v.get(k - 1), x.get(k - 1), l)
                - alpha * remainder_b(v.get(k), x.get(k), l)
        })
        .collect();
    Ok(CenteredVector::new(out))
}

/// Lipschitz constant of `F` on the state space for the `L2(g_theta)` norm,
/// obtained from the bounds `c w(k+1) <= w(k) <= d w(k+1)` with
/// `c = d = 1/theta`:
///
/// `|F(u) - F(v)| <= (alpha L sqrt(2 (d + 1)) + beta sqrt(2 (1/c + 1))) |u - v|`.
pub fn lipschitz_bound(params: &ModelParams, theta: f64) -> f64 {
    let d = 1.0 / theta;
    let c_inv = theta;
    let l = params.choices() as f64;
    params.alpha() * l * (2.0 * (d + 1.0)).sqrt() + params.beta() * (2.0 * (c_inv + 1.0)).sqrt()
}
