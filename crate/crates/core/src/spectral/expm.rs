//! `e^{Kt} z` by uniformization.
//!
//! With `q >= max |K_kk|`, `P = I + K/q` has nonnegative entries and
//! `e^{Kt} = sum_n e^{-qt} (qt)^n / n! P^n`. The series is applied on chunks
//! with `q h <= 16` so the Poisson weights never underflow; with nonnegative
//! input every partial sum is nonnegative, which keeps small entries
//! accurate in relative terms.

use nalgebra::DMatrix;

use super::TridiagonalOperator;
use crate::error::{Error, Result};
use crate::model::{check_dims, CenteredVector};

const CHUNK_RATE: f64 = 16.0;
const POISSON_TAIL: f64 = 1e-17;

/// Returns `e^{Kt} z0`.
pub fn matrix_exponential_action(op: &TridiagonalOperator, z0: &CenteredVector, t: f64) -> Result<CenteredVector> {
    check_dims(op.dim(), z0.level())?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let prop = Propagator::new(op)?;
    let mut z = z0.as_slice().to_vec();
    prop.advance(&mut z, t);
    Ok(CenteredVector::new(z))
}

/// Dense `e^{Kt}`, assembled column by column.
pub fn exponential_matrix(op: &TridiagonalOperator, t: f64) -> Result<DMatrix<f64>> {
    let n = op.dim();
    let prop = Propagator::new(op)?;
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        prop.advance(&mut col, t);
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Reusable uniformization engine for one operator.
#[derive(Debug, Clone)]
pub struct Propagator {
    op: TridiagonalOperator,
    rate: f64,
}

impl Propagator {
    pub fn new(op: &TridiagonalOperator) -> Result<Self> {
        for (i, &s) in op.subdiagonal().iter().chain(op.superdiagonal()).enumerate() {
            if s < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "off-diagonal entry {i} is negative; uniformization needs a Metzler matrix"
                )));
            }
        }
        let rate = op.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        Ok(Self { op: op.clone(), rate })
    }

    /// Replaces `z` by `e^{Kt} z`.
    pub fn advance(&self, z: &mut [f64], t: f64) {
        if t <= 0.0 {
            return;
        }
        let chunks = (self.rate * t / CHUNK_RATE).ceil().max(1.0) as usize;
        let h = t / chunks as f64;
        let mut work = Workspace::new(z.len());
        for _ in 0..chunks {
            self.chunk(z, h, &mut work);
        }
    }

    fn chunk(&self, z: &mut [f64], h: f64, work: &mut Workspace) {
        let qh = self.rate * h;
        let q = self.rate;
        let Workspace { term, next, acc } = work;
        term.copy_from_slice(z);
        let mut weight = (-qh).exp();
        let mut mass = weight;
        for (a, x) in acc.iter_mut().zip(term.iter()) {
            *a = weight * x;
        }
        let mut n = 0usize;
        loop {
            n += 1;
            // term <- P term = term + K term / q
            self.op.apply_into(term, next);
            for (t, kt) in term.iter_mut().zip(next.iter()) {
                *t += kt / q;
            }
            weight *= qh / n as f64;
            mass += weight;
            for (a, x) in acc.iter_mut().zip(term.iter()) {
                *a += weight * x;
            }
            if (n as f64) > qh && 1.0 - mass < POISSON_TAIL {
                break;
            }
            if n > 10_000 {
                break;
            }
        }
        z.copy_from_slice(acc);
    }
}

struct Workspace {
    term: Vec<f64>,
    next: Vec<f64>,
    acc: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { term: vec![0.0; n], next: vec![0.0; n], acc: vec![0.0; n] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::spectral::build_operator;

    #[test]
    fn identity_at_time_zero() {
        let op = build_operator(&ModelParams::with_load(0.7, 2).unwrap(), 6).unwrap();
        let z0 = CenteredVector::new(vec![0.3, -0.1, 0.2, 0.0, 0.05, -0.4]);
        assert_eq!(matrix_exponential_action(&op, &z0, 0.0).unwrap(), z0);
        assert!(matrix_exponential_action(&op, &z0, -1.0).is_err());
    }

    #[test]
    fn semigroup_law() {
        let op = build_operator(&ModelParams::with_load(0.9, 2).unwrap(), 9).unwrap();
        let z0 = CenteredVector::new((1..=9).map(|k| (k as f64).sin()).collect());
        let a = matrix_exponential_action(&op, &z0, 1.3).unwrap();
        let ab = matrix_exponential_action(&op, &a, 2.1).unwrap();
        let direct = matrix_exponential_action(&op, &z0, 3.4).unwrap();
        for k in 1..=9 {
            assert!((ab.get(k) - direct.get(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_case_is_exponential() {
        let op = TridiagonalOperator::from_parts(vec![], vec![-0.7], vec![]).unwrap();
        let z = matrix_exponential_action(&op, &CenteredVector::new(vec![2.0]), 5.0).unwrap();
        assert!((z.get(1) - 2.0 * (-3.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn matches_dense_taylor_on_short_times() {
        let op = build_operator(&ModelParams::with_load(0.6, 3).unwrap(), 5).unwrap();
        let k = op.to_dense();
        let t = 0.05;
        let mut series = DMatrix::identity(5, 5);
        let mut term = DMatrix::identity(5, 5);
        for n in 1..30 {
            term = &term * &k * (t / n as f64);
            series += &term;
        }
        let e = exponential_matrix(&op, t).unwrap();
        assert!((e - series).amax() < 1e-14);
    }
}
