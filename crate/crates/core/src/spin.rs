//! Spin configurations on `{-1, +1}^N`, packed into a `u64`.
//!
//! Bit `i` of the index is set when `σ_i = +1`; the canonical index of a
//! configuration is therefore the packed word itself.

use crate::error::{Error, Result};

/// Largest supported system size.
pub const MAX_SPINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    n: u8,
    bits: u64,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl SpinConfig {
    /// Configuration with canonical index `index`.
    pub fn from_index(n: usize, index: u64) -> Result<Self> {
        if n == 0 || n > MAX_SPINS {
            return Err(crate::error::config("N must be in 1..=64"));
        }
        if index & !mask(n) != 0 {
            return Err(Error::Precondition(alloc::format!(
                "index {index} out of range for N = {n}"
            )));
        }
        Ok(Self { n: n as u8, bits: index })
    }

    pub fn all_up(n: usize) -> Self {
        Self { n: n as u8, bits: mask(n) }
    }

    pub fn all_down(n: usize) -> Self {
        Self { n: n as u8, bits: 0 }
    }

    /// Builds a configuration from spins given as `±1`.
    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let n = spins.len();
        let mut cfg = Self::from_index(n, 0)?;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => cfg.bits |= 1 << i,
                -1 => {}
                _ => return Err(crate::error::config("spins must be +1 or -1")),
            }
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn index(&self) -> u64 {
        self.bits
    }

    /// `σ_i` as `±1`. Panics if `i >= N`.
    #[inline]
    pub fn spin(&self, i: usize) -> i8 {
        assert!(i < self.n());
        if self.bits >> i & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// `σ_i` as a float, without the range check.
    #[inline]
    pub(crate) fn spin_f64(&self, i: usize) -> f64 {
        if self.bits >> i & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// The configuration `σ^k` with spin `k` flipped.
    pub fn flipped(&self, k: usize) -> Result<Self> {
        if k >= self.n() {
            return Err(Error::SiteOutOfRange { site: k, n: self.n() });
        }
        Ok(Self { n: self.n, bits: self.bits ^ (1 << k) })
    }

    /// Number of `+1` spins.
    pub fn up_count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// `m_N(σ) = (1/N) Σ σ_i`.
    pub fn magnetization(&self) -> f64 {
        (2.0 * self.up_count() as f64 - self.n() as f64) / self.n() as f64
    }

    pub fn spins(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.n()).map(|i| self.spin(i))
    }
}

impl core::fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for s in self.spins() {
            f.write_str(if s == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}
