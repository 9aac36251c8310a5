use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CenteredVector, ModelParams, TailVector};

/// Queue lengths of an `N`-queue pool, with occupancy and tail counts kept
/// in step with every event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState {
    lengths: Vec<u32>,
    /// `c(j) = #{i : length_i = j}`.
    occupancy: Vec<usize>,
    /// `tail[k] = #{i : length_i >= k}`, so `tail[0] = N`.
    tail: Vec<usize>,
    /// Indices of queues with positive length, in arbitrary order.
    busy: Vec<usize>,
    /// Position of each queue in `busy`, `usize::MAX` when idle.
    busy_slot: Vec<usize>,
}

impl SystemState {
    /// All `n` queues empty.
    pub fn empty(n: usize) -> Self {
        Self::from_lengths(vec![0; n])
    }

    pub fn from_lengths(lengths: Vec<u32>) -> Self {
        let n = lengths.len();
        let top = lengths.iter().copied().max().unwrap_or(0) as usize;
        let mut occupancy = vec![0usize; top + 1];
        let mut busy = Vec::new();
        let mut busy_slot = vec![usize::MAX; n];
        for (i, &l) in lengths.iter().enumerate() {
            occupancy[l as usize] += 1;
            if l > 0 {
                busy_slot[i] = busy.len();
                busy.push(i);
            }
        }
        let mut tail = vec![0usize; top + 2];
        for j in (0..=top).rev() {
            tail[j] = tail[j + 1] + occupancy[j];
        }
        tail.pop();
        Self { lengths, occupancy, tail, busy, busy_slot }
    }

    /// The state with `counts[k-1]` queues of length at least `k`; `counts`
    /// must be nonincreasing and bounded by `n`.
    pub fn from_tail_counts(n: usize, counts: &[usize]) -> Result<Self> {
        let mut prev = n;
        for (k, &c) in counts.iter().enumerate() {
            if c > prev {
                return Err(Error::InvalidTail(format!(
                    "tail count at k = {} is {c}, above the previous count {prev}",
                    k + 1
                )));
            }
            prev = c;
        }
        let lengths = (0..n).map(|i| counts.iter().take_while(|&&c| c > i).count() as u32).collect();
        Ok(Self::from_lengths(lengths))
    }

    /// Rounds `N u(k)` to the nearest integer for every `k`, so that
    /// `|R(k) - u(k)| <= 1/(2N)`.
    pub fn rounded(n: usize, target: &TailVector) -> Self {
        let counts: Vec<usize> = target.as_slice()[1..]
            .iter()
            .map(|u| ((n as f64 * u).round() as usize).min(n))
            .collect();
        let mut monotone = counts.clone();
        for k in 1..monotone.len() {
            monotone[k] = monotone[k].min(monotone[k - 1]);
        }
        let last = monotone.iter().rposition(|&c| c > 0).map_or(0, |p| p + 1);
        Self::from_tail_counts(n, &monotone[..last]).expect("monotonized counts are valid")
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn length(&self, i: usize) -> u32 {
        self.lengths[i]
    }

    /// `c(j)`; zero above the longest queue.
    pub fn occupancy(&self, j: usize) -> usize {
        self.occupancy.get(j).copied().unwrap_or(0)
    }

    /// `#{i : length_i >= k}`.
    pub fn tail_count(&self, k: usize) -> usize {
        self.tail.get(k).copied().unwrap_or(0)
    }

    pub fn tail_counts(&self) -> &[usize] {
        &self.tail
    }

    pub fn busy_count(&self) -> usize {
        self.busy.len()
    }

    pub fn max_length(&self) -> usize {
        self.tail.len() - 1
    }

    /// `R(k) = tail_count(k) / N`.
    pub fn fraction(&self, k: usize) -> f64 {
        self.tail_count(k) as f64 / self.size() as f64
    }

    /// `R(0..=level)`.
    pub fn tail_vector(&self, level: usize) -> TailVector {
        TailVector::from_raw((0..=level).map(|k| self.fraction(k)).collect())
    }

    /// `sqrt(N) (R(k) - u(k))` for `k = 1..=level`.
    pub fn fluctuation(&self, center: &TailVector) -> CenteredVector {
        let sn = (self.size() as f64).sqrt();
        CenteredVector::new((1..=center.level()).map(|k| sn * (self.fraction(k) - center.get(k))).collect())
    }

    /// Number of queues longer than `level`.
    pub fn overflow(&self, level: usize) -> usize {
        self.tail_count(level + 1)
    }

    pub(crate) fn busy_queue(&self, slot: usize) -> usize {
        self.busy[slot]
    }

    /// Adds a customer to queue `i`; returns its new length.
    pub(crate) fn push(&mut self, i: usize) -> usize {
        let old = self.lengths[i] as usize;
        let new = old + 1;
        self.lengths[i] = new as u32;
        self.occupancy[old] -= 1;
        if new == self.occupancy.len() {
            self.occupancy.push(0);
            self.tail.push(0);
        }
        self.occupancy[new] += 1;
        self.tail[new] += 1;
        if old == 0 {
            self.busy_slot[i] = self.busy.len();
            self.busy.push(i);
        }
        new
    }

    /// Removes a customer from busy queue `i`; returns its former length.
    pub(crate) fn pop(&mut self, i: usize) -> usize {
        let old = self.lengths[i] as usize;
        debug_assert!(old > 0);
        self.lengths[i] -= 1;
        self.occupancy[old] -= 1;
        self.occupancy[old - 1] += 1;
        self.tail[old] -= 1;
        if old == self.tail.len() - 1 && self.tail[old] == 0 {
            self.tail.pop();
            self.occupancy.pop();
        }
        if old == 1 {
            let slot = self.busy_slot[i];
            let last = self.busy.pop().expect("busy list holds queue i");
            if last != i {
                self.busy[slot] = last;
                self.busy_slot[last] = slot;
            }
            self.busy_slot[i] = usize::MAX;
        }
        old
    }

    /// Full consistency check of the incremental bookkeeping.
    pub fn check_invariants(&self) -> bool {
        let rebuilt = Self::from_lengths(self.lengths.clone());
        let mut busy = self.busy.clone();
        busy.sort_unstable();
        let mut expected: Vec<usize> = (0..self.size()).filter(|&i| self.lengths[i] > 0).collect();
        expected.sort_unstable();
        rebuilt.occupancy == self.occupancy
            && rebuilt.tail == self.tail
            && busy == expected
            && self.busy.iter().enumerate().all(|(s, &i)| self.busy_slot[i] == s)
            && self.occupancy.iter().sum::<usize>() == self.size()
    }
}

/// Builds the rounded fixed-point state.
pub fn rounded_equilibrium(params: &ModelParams, n: usize, level: usize) -> Result<SystemState> {
    let u = crate::model::fixed_point(params, level)?;
    Ok(SystemState::rounded(n, &u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bookkeeping_follows_pushes_and_pops() {
        let mut s = SystemState::empty(4);
        s.push(2);
        s.push(2);
        s.push(0);
        assert_eq!(s.tail_counts(), &[4, 2, 1]);
        assert!(s.check_invariants());
        s.pop(2);
        s.pop(0);
        assert_eq!(s.tail_counts(), &[4, 1]);
        assert_eq!(s.busy_count(), 1);
        assert!(s.check_invariants());
    }

    #[test]
    fn tail_counts_round_trip() {
        let s = SystemState::from_tail_counts(5, &[4, 2, 2, 1]).unwrap();
        assert_eq!(s.tail_counts(), &[5, 4, 2, 2, 1]);
        assert!(SystemState::from_tail_counts(5, &[2, 3]).is_err());
    }

    #[test]
    fn rounding_is_within_half_lattice_step() {
        let p = ModelParams::with_load(0.9, 2).unwrap();
        for n in [7usize, 100, 1234] {
            let u = crate::model::fixed_point(&p, 9).unwrap();
            let s = SystemState::rounded(n, &u);
            for k in 1..=9 {
                assert!((s.fraction(k) - u.get(k)).abs() <= 0.5 / n as f64 + 1e-15);
            }
        }
    }
}
