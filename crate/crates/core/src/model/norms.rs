use super::{check_dims, CenteredVector, WeightSequence};
use crate::error::{Error, Result};

/// `sum_k x(k)^2 / w(k)`, with Neumaier-compensated summation.
pub fn weighted_norm_squared(x: &CenteredVector, w: &WeightSequence) -> Result<f64> {
    check_dims(w.level(), x.level())?;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (k, &xk) in x.as_slice().iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        // x^2 / w evaluated through logs so tiny weights do not overflow
        let term = (2.0 * xk.abs().ln() - w.log_weight(k + 1)).exp();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// The `L2(w)` norm `(sum_k x(k)^2 w(k)^-1)^(1/2)`.
pub fn weighted_norm(x: &CenteredVector, w: &WeightSequence) -> Result<f64> {
    weighted_norm_squared(x, w).map(f64::sqrt)
}

/// Tail sums `(x(k) + x(k+1) + ...)_k`.
pub fn tail_sums(x: &CenteredVector) -> CenteredVector {
    let mut out = x.as_slice().to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] += out[k + 1];
    }
    CenteredVector::new(out)
}

/// Constant `K_theta` bounding the tail-sum map on `L2(g_theta)`.
///
/// Takes the smallest `n` with `n theta^(n-1) < 1` and returns
/// `sqrt(n (1 - theta^(n-1)) / ((1 - theta)(1 - n theta^(n-1))))`.
pub fn telescoping_constant(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
    }
    let mut n = 2usize;
    while n as f64 * theta.powi(n as i32 - 1) >= 1.0 {
        n += 1;
    }
    let nf = n as f64;
    let q = theta.powi(n as i32 - 1);
    Ok((nf * (1.0 - q) / ((1.0 - theta) * (1.0 - nf * q))).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_of_zero_and_units() {
        let w = WeightSequence::geometric(0.5, 5).unwrap();
        assert_eq!(weighted_norm(&CenteredVector::zeros(5), &w).unwrap(), 0.0);
        for k in 1..=5 {
            let n = weighted_norm(&CenteredVector::unit(5, k), &w).unwrap();
            assert!((n - 0.5f64.powf(-(k as f64) / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_term_norm() {
        let w = WeightSequence::geometric(0.5, 2).unwrap();
        let n = weighted_norm(&CenteredVector::new(vec![0.1, 0.2]), &w).unwrap();
        assert!((n - 0.18f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_dimension_mismatch() {
        let w = WeightSequence::geometric(0.5, 2).unwrap();
        assert!(weighted_norm(&CenteredVector::zeros(3), &w).is_err());
    }

    #[test]
    fn tail_sums_accumulate_from_the_right() {
        let t = tail_sums(&CenteredVector::new(vec![1.0, 2.0, 3.0]));
        assert_eq!(t.as_slice(), &[6.0, 5.0, 3.0]);
    }

    #[test]
    fn telescoping_constant_recipe() {
        // theta = 0.5: n = 2 gives 2 * 0.5 = 1, not < 1; n = 3 gives 0.75
        let k = telescoping_constant(0.5).unwrap();
        let expected = (3.0f64 * 0.75 / (0.5 * 0.25)).sqrt();
        assert!((k - expected).abs() < 1e-14);
        assert!(telescoping_constant(1.0).is_err());
    }
}
