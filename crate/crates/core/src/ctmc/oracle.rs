//! Exact stationary law of a tiny capped pool, used to validate the simulator.
//!
//! States are vectors of queue lengths in `{0, ..., C}^N`. An arrival samples
//! `L` distinct queues and joins the shortest; when the shortest sampled
//! queue is already at the cap the customer is turned away.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

const STATE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDistribution {
    pub size: usize,
    pub cap: usize,
    /// Stationary probability of each state, indexed by the base-`(C+1)` code
    /// of the length vector.
    pub probabilities: Vec<f64>,
    /// Long-run fraction of arrivals turned away at the cap.
    pub blocking_probability: f64,
    /// Mass of states where some queue sits at the cap.
    pub cap_probability: f64,
    /// Accepted arrivals per unit time.
    pub arrival_flux: f64,
    pub departure_flux: f64,
}

impl OracleDistribution {
    pub fn lengths(&self, code: usize) -> Vec<usize> {
        decode(code, self.size, self.cap)
    }

    /// Law of `N R(k)`, the number of queues with at least `k` customers.
    pub fn tail_marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.size + 1];
        for (code, p) in self.probabilities.iter().enumerate() {
            let m = self.lengths(code).iter().filter(|&&l| l >= k).count();
            out[m] += p;
        }
        out
    }
}

fn decode(mut code: usize, n: usize, cap: usize) -> Vec<usize> {
    let base = cap + 1;
    (0..n)
        .map(|_| {
            let d = code % base;
            code /= base;
            d
        })
        .collect()
}

fn encode(lengths: &[usize], cap: usize) -> usize {
    lengths.iter().rev().fold(0, |acc, &l| acc * (cap + 1) + l)
}

/// All `L`-subsets of `0..n`.
fn subsets(n: usize, l: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, l: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == l {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, l, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, l, &mut Vec::new(), &mut out);
    out
}

/// Builds the generator on `{0..=cap}^n` and solves `pi Q = 0`, `sum pi = 1`.
pub fn exact_small_oracle(params: &ModelParams, n: usize, cap: usize) -> Result<OracleDistribution> {
    let l = params.choices();
    if n == 0 || l > n {
        return Err(Error::InvalidArgument(format!("need 1 <= L <= N, got L = {l}, N = {n}")));
    }
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be positive".into()));
    }
    let states = (cap + 1).checked_pow(n as u32).filter(|&s| s <= STATE_LIMIT).ok_or(
        Error::StateSpaceTooLarge { states: (cap + 1).saturating_pow(n as u32), limit: STATE_LIMIT },
    )?;
    let (alpha, beta) = (params.alpha(), params.beta());
    let picks = subsets(n, l);
    let pick_prob = 1.0 / picks.len() as f64;
    let arrival_rate = n as f64 * alpha;

    // transposed generator: column = source state
    let mut qt = DMatrix::<f64>::zeros(states, states);
    let mut blocked_rate = vec![0.0; states];
    for code in 0..states {
        let lengths = decode(code, n, cap);
        let mut out = 0.0;
        for pick in &picks {
            let shortest = pick.iter().map(|&i| lengths[i]).min().expect("nonempty pick");
            if shortest == cap {
                blocked_rate[code] += arrival_rate * pick_prob;
                continue;
            }
            let ties: Vec<usize> = pick.iter().copied().filter(|&i| lengths[i] == shortest).collect();
            let rate = arrival_rate * pick_prob / ties.len() as f64;
            for &i in &ties {
                let mut next = lengths.clone();
                next[i] += 1;
                qt[(encode(&next, cap), code)] += rate;
                out += rate;
            }
        }
        for i in 0..n {
            if lengths[i] > 0 {
                let mut next = lengths.clone();
                next[i] -= 1;
                qt[(encode(&next, cap), code)] += beta;
                out += beta;
            }
        }
        qt[(code, code)] -= out;
    }
    let mut rhs = DVector::<f64>::zeros(states);
    for j in 0..states {
        qt[(0, j)] = 1.0;
    }
    rhs[0] = 1.0;
    let pi = qt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("capped generator is singular".into()))?;
    let probabilities: Vec<f64> = pi.iter().map(|p| p.max(0.0)).collect();

    let mut blocking = 0.0;
    let mut cap_mass = 0.0;
    let mut departure_flux = 0.0;
    for (code, p) in probabilities.iter().enumerate() {
        let lengths = decode(code, n, cap);
        blocking += p * blocked_rate[code];
        if lengths.contains(&cap) {
            cap_mass += p;
        }
        departure_flux += p * beta * lengths.iter().filter(|&&x| x > 0).count() as f64;
    }
    Ok(OracleDistribution {
        size: n,
        cap,
        blocking_probability: blocking / arrival_rate,
        cap_probability: cap_mass,
        arrival_flux: arrival_rate - blocking,
        departure_flux,
        probabilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_queue_is_truncated_geometric() {
        let p = ModelParams::with_load(0.5, 1).unwrap();
        let o = exact_small_oracle(&p, 1, 8).unwrap();
        let z: f64 = (0..=8).map(|j| 0.5f64.powi(j)).sum();
        for j in 0..=8 {
            assert!((o.probabilities[j] - 0.5f64.powi(j as i32) / z).abs() < 1e-14);
        }
    }

    #[test]
    fn flow_balance() {
        let p = ModelParams::with_load(0.5, 2).unwrap();
        let o = exact_small_oracle(&p, 2, 8).unwrap();
        assert!((o.arrival_flux - o.departure_flux).abs() < 1e-12);
        assert!((o.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(o.cap_probability < 1e-4);
    }

    #[test]
    fn state_space_limit() {
        let p = ModelParams::with_load(0.5, 2).unwrap();
        assert!(matches!(exact_small_oracle(&p, 5, 8), Err(Error::StateSpaceTooLarge { .. })));
    }
}
