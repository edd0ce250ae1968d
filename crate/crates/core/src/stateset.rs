//! Subsets of the configuration space.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::spin::SpinConfig;

/// A subset of `{-1,+1}^N`, either listed state by state or given as the
/// pre-image of a set of magnetization levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateSet {
    /// Indicator over the `2^N` canonical indices, one bit per state.
    Explicit { n: usize, words: Vec<u64> },
    /// All configurations whose number of `+1` spins is in `up_counts`
    /// (sorted, deduplicated). The level `k` has magnetization `2k/N - 1`.
    Levels { n: usize, up_counts: Vec<usize> },
}

impl StateSet {
    /// Explicit set from state indices. Requires `N <= 32`.
    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = u64>) -> Result<Self> {
        if n == 0 || n > 32 {
            return Err(crate::error::config("explicit state sets need 1 <= N <= 32"));
        }
        let size = 1u64 << n;
        let mut words = vec![0u64; (size as usize).div_ceil(64)];
        for idx in indices {
            if idx >= size {
                return Err(Error::Precondition(alloc::format!(
                    "state index {idx} out of range for N = {n}"
                )));
            }
            words[(idx / 64) as usize] |= 1 << (idx % 64);
        }
        Ok(Self::Explicit { n, words })
    }

    pub fn from_configs(n: usize, configs: &[SpinConfig]) -> Result<Self> {
        for c in configs {
            if c.n() != n {
                return Err(Error::Dimension { expected: n, found: c.n() });
            }
        }
        Self::from_indices(n, configs.iter().map(|c| c.index()))
    }

    /// Configurations with exactly `k` up spins for some `k` in `up_counts`.
    pub fn levels(n: usize, up_counts: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut up_counts: Vec<usize> = up_counts.into_iter().collect();
        if let Some(&k) = up_counts.iter().find(|&&k| k > n) {
            return Err(crate::error::config(alloc::format!(
                "level with {k} up spins does not exist for N = {n}"
            )));
        }
        up_counts.sort_unstable();
        up_counts.dedup();
        Ok(Self::Levels { n, up_counts })
    }

    /// The level set of magnetization closest to `m`, ties going to the
    /// smaller magnetization.
    pub fn nearest_level(n: usize, m: f64) -> Result<Self> {
        Self::levels(n, [nearest_up_count(n, m)])
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Explicit { n, .. } | Self::Levels { n, .. } => *n,
        }
    }

    pub fn contains_index(&self, idx: u64) -> bool {
        match self {
            Self::Explicit { words, .. } => {
                words.get((idx / 64) as usize).is_some_and(|w| w >> (idx % 64) & 1 == 1)
            }
            Self::Levels { up_counts, .. } => {
                up_counts.binary_search(&(idx.count_ones() as usize)).is_ok()
            }
        }
    }

    pub fn contains(&self, s: &SpinConfig) -> bool {
        s.n() == self.n() && self.contains_index(s.index())
    }

    /// Number of configurations in the set (as a float; `2^64` overflows).
    pub fn cardinality(&self) -> f64 {
        match self {
            Self::Explicit { words, .. } => words.iter().map(|w| w.count_ones() as f64).sum(),
            Self::Levels { n, up_counts } => up_counts
                .iter()
                .map(|&k| crate::math::exp(crate::math::log_binomial(*n, k)))
                .sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Self::Explicit { words, .. } => words.iter().all(|&w| w == 0),
            Self::Levels { up_counts, .. } => up_counts.is_empty(),
        }
    }

    /// Dense indicator over all `2^N` states.
    pub fn indicator(&self) -> Result<Vec<bool>> {
        let n = self.n();
        if n > 32 {
            return Err(Error::Capability { n, limit: 32 });
        }
        Ok((0..1u64 << n).map(|i| self.contains_index(i)).collect())
    }

    /// Canonical indices of the members, in increasing order.
    pub fn indices(&self) -> Result<Vec<u64>> {
        Ok(self
            .indicator()?
            .into_iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i as u64))
            .collect())
    }

    /// Whether two sets share a configuration.
    pub fn intersects(&self, other: &StateSet) -> bool {
        if self.n() != other.n() {
            return false;
        }
        match (self, other) {
            (Self::Levels { up_counts: a, .. }, Self::Levels { up_counts: b, .. }) => {
                a.iter().any(|k| b.binary_search(k).is_ok())
            }
            (Self::Explicit { words: a, .. }, Self::Explicit { words: b, .. }) => {
                a.iter().zip(b).any(|(x, y)| x & y != 0)
            }
            (Self::Explicit { words, .. }, lv @ Self::Levels { .. })
            | (lv @ Self::Levels { .. }, Self::Explicit { words, .. }) => {
                words.iter().enumerate().any(|(wi, &w)| {
                    let mut w = w;
                    while w != 0 {
                        let b = w.trailing_zeros() as u64;
                        if lv.contains_index(wi as u64 * 64 + b) {
                            return true;
                        }
                        w &= w - 1;
                    }
                    false
                })
            }
        }
    }

    /// Union with another set of the same size, as an explicit set unless
    /// both are level sets.
    pub fn union(&self, other: &StateSet) -> Result<StateSet> {
        if self.n() != other.n() {
            return Err(Error::Dimension { expected: self.n(), found: other.n() });
        }
        match (self, other) {
            (Self::Levels { n, up_counts: a }, Self::Levels { up_counts: b, .. }) => {
                Self::levels(*n, a.iter().chain(b).copied())
            }
            _ => {
                let n = self.n();
                let (a, b) = (self.indicator()?, other.indicator()?);
                Self::from_indices(
                    n,
                    a.iter().zip(&b).enumerate().filter_map(|(i, (x, y))| (*x || *y).then_some(i as u64)),
                )
            }
        }
    }
}

/// Number of up spins of the grid magnetization nearest to `m`; ties go to
/// the smaller magnetization.
pub fn nearest_up_count(n: usize, m: f64) -> usize {
    let target = (m + 1.0) * n as f64 / 2.0;
    let lo = libm::floor(target).clamp(0.0, n as f64) as usize;
    let hi = (lo + 1).min(n);
    if (hi as f64 - target).abs() < (target - lo as f64).abs() {
        hi
    } else {
        lo
    }
}

/// Ensures sets are non-empty, of size `n` and pairwise disjoint.
pub fn check_disjoint(n: usize, sets: &[&StateSet]) -> Result<()> {
    for s in sets {
        if s.n() != n {
            return Err(Error::Dimension { expected: n, found: s.n() });
        }
        if s.is_empty() {
            return Err(Error::EmptySet("state set"));
        }
    }
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if a.intersects(b) {
                return Err(Error::Overlap);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_sets_count_binomially() {
        let s = StateSet::levels(6, [2]).unwrap();
        assert_eq!(s.cardinality(), 15.0);
        assert_eq!(s.indices().unwrap().len(), 15);
        assert!(s.contains_index(0b000011));
        assert!(!s.contains_index(0b000111));
    }

    #[test]
    fn nearest_level_tie_goes_down() {
        // N = 4, grid -1,-0.5,0,0.5,1: m = 0.25 is halfway between 0 and 0.5.
        assert_eq!(nearest_up_count(4, 0.25), 2);
        assert_eq!(nearest_up_count(4, 0.26), 3);
        assert_eq!(nearest_up_count(4, -1.0), 0);
        assert_eq!(nearest_up_count(4, 1.0), 4);
    }

    #[test]
    fn overlap_detection_mixed() {
        let a = StateSet::from_indices(4, [0b0011]).unwrap();
        let b = StateSet::levels(4, [2]).unwrap();
        let c = StateSet::levels(4, [3]).unwrap();
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
        assert_eq!(check_disjoint(4, &[&a, &b]), Err(Error::Overlap));
        assert!(check_disjoint(4, &[&a, &c]).is_ok());
        let u = a.union(&c).unwrap();
        assert_eq!(u.cardinality(), 5.0);
    }
}
