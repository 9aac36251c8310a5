//! Independent route to the stationary covariance:
//! `Sigma = int_0^T e^{Kt} D e^{K't} dt` by adaptive composite Gauss-Legendre,
//! with `e^{Kt}` from dense uniformization. The integrand is entrywise
//! nonnegative, so relative accuracy per entry is meaningful.

#![allow(dead_code)]

use jsq_core::ou::NoiseVariances;
use jsq_core::spectral::{exponential_matrix, TridiagonalOperator};
use nalgebra::DMatrix;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn integrand(op: &TridiagonalOperator, d: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let e = exponential_matrix(op, t).expect("Metzler operator");
    &e * d * e.transpose()
}

fn panel(op: &TridiagonalOperator, d: &DMatrix<f64>, rule: &[(f64, f64)], a: f64, b: f64) -> DMatrix<f64> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let n = d.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for &(x, w) in rule {
        acc += integrand(op, d, mid + half * x) * (w * half);
    }
    acc
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64, floor: f64) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= (rel * y.abs()).max(floor))
}

/// `int_0^t_end e^{Kt} diag(v) e^{K't} dt`, each panel halved until the
/// split estimate agrees with the whole one to `rel` (entrywise, relative to
/// the entry, or absolutely at round-off of the panel's largest entry).
pub fn quadrature_covariance(op: &TridiagonalOperator, nv: &NoiseVariances, t_end: f64, rel: f64) -> DMatrix<f64> {
    let n = op.dim();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { nv.get(i + 1) } else { 0.0 });
    let rule = gauss_legendre(16);
    let mut total = DMatrix::zeros(n, n);
    // geometric first cut: the integrand varies fastest near t = 0
    let mut edges = vec![0.0];
    let mut h = t_end / 1024.0;
    while *edges.last().unwrap() < t_end {
        let next = (edges.last().unwrap() + h).min(t_end);
        edges.push(next);
        h *= 2.0;
    }
    let mut stack: Vec<(f64, f64, DMatrix<f64>, usize)> =
        edges.windows(2).map(|w| (w[0], w[1], panel(op, &d, &rule, w[0], w[1]), 0)).collect();
    while let Some((a, b, whole, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = panel(op, &d, &rule, a, m);
        let right = panel(op, &d, &rule, m, b);
        let split = &left + &right;
        // entries below round-off of the largest one cannot converge in relative terms
        let floor = 1e-14 * split.amax();
        if depth >= 24 || close(&whole, &split, rel, floor) {
            total += split;
        } else {
            stack.push((a, m, left, depth + 1));
            stack.push((m, b, right, depth + 1));
        }
    }
    total
}
