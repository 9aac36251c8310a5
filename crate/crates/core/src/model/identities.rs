//! Combinatorial identities behind the finite-`N` corrections.

use super::drift::falling_factorial;

/// Sampling correction `A^N(a) = (Na)_L / (N)_L - a^L`: the difference between
/// choosing the `L` queues without and with replacement.
pub fn correction_a(a: f64, n: usize, choices: usize) -> f64 {
    let nf = n as f64;
    falling_factorial(nf * a, choices) / falling_factorial(nf, choices) - a.powi(choices as i32)
}

/// Expanded form of [`correction_a`]:
///
/// `sum_{j=1}^{L-1} (a-1)^j a^(L-j) e_j(r_1, ..., r_{L-1})`, `r_i = i / (N - i)`,
///
/// where `e_j` is the elementary symmetric polynomial of degree `j`.
pub fn correction_a_expanded(a: f64, n: usize, choices: usize) -> f64 {
    if choices < 2 {
        return 0.0;
    }
    let nf = n as f64;
    // e[j] accumulates elementary symmetric sums of the ratios
    let mut e = vec![0.0; choices];
    e[0] = 1.0;
    for i in 1..choices {
        let r = i as f64 / (nf - i as f64);
        for j in (1..=i).rev() {
            e[j] += r * e[j - 1];
        }
    }
    (1..choices)
        .map(|j| (a - 1.0).powi(j as i32) * a.powi((choices - j) as i32) * e[j])
        .sum()
}

/// Binomial remainder `B(a,h) = (a+h)^L - a^L - L a^(L-1) h`, evaluated as
/// `sum_{i=2}^{L} C(L,i) a^(L-i) h^i` to avoid cancellation.
pub fn remainder_b(a: f64, h: f64, choices: usize) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for i in 1..=choices {
        binom = binom * (choices - i + 1) as f64 / i as f64;
        if i >= 2 {
            sum += binom * a.powi((choices - i) as i32) * h.powi(i as i32);
        }
    }
    sum
}

/// Upper bound `h^L + (2^L - L - 2) a h^2`, valid for `L >= 2` and
/// `a, a + h` in `[0, 1]`.
pub fn remainder_b_bound(a: f64, h: f64, choices: usize) -> f64 {
    let l = choices as i32;
    h.abs().powi(l) + (2f64.powi(l) - choices as f64 - 2.0) * a * h * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correction_vanishes_at_one() {
        for n in 2..10 {
            for l in 1..=n {
                assert!(correction_a(1.0, n, l).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn correction_two_queues() {
        assert!((correction_a(0.5, 2, 2) + 0.25).abs() < 1e-15);
        assert!((correction_a_expanded(0.5, 2, 2) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn remainder_low_orders() {
        for (a, h) in [(0.3, 0.2), (0.9, -0.5), (2.0, 3.0)] {
            assert_eq!(remainder_b(a, h, 1), 0.0);
            assert_eq!(remainder_b(a, h, 2), h * h);
        }
        assert!((remainder_b(0.5, 0.1, 3) - 0.016).abs() < 1e-15);
    }

    #[test]
    fn remainder_matches_direct_formula() {
        for l in 1..=6 {
            let (a, h) = (0.37f64, 0.21f64);
            let direct = (a + h).powi(l as i32) - a.powi(l as i32) - l as f64 * a.powi(l as i32 - 1) * h;
            assert!((remainder_b(a, h, l) - direct).abs() < 1e-14);
        }
    }
}
