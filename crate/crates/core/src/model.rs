//! Hamiltonians, Gibbs measures and the quenched/annealed energy gap.
//!
//! `H_N(σ) = -(1/N) Σ_{i<j} J_ij σ_i σ_j - h Σ_i σ_i` and
//! `μ_N(σ) = e^{-β H_N(σ)} / Z_N`. Everything that enumerates the `2^N`
//! configurations refuses to run above [`ModelParams::enumeration_limit`].

use alloc::vec::Vec;

use crate::disorder::{edges, CouplingMatrix};
use crate::error::{config, Error, Result};
use crate::math;
use crate::spin::SpinConfig;

/// Inverse temperature, field and the exact-enumeration bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub beta: f64,
    pub h: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_limit"))]
    pub enumeration_limit: usize,
}

#[cfg(feature = "serde")]
fn default_limit() -> usize {
    crate::DEFAULT_ENUMERATION_LIMIT
}

impl ModelParams {
    pub fn new(beta: f64, h: f64) -> Result<Self> {
        let p = Self { beta, h, enumeration_limit: crate::DEFAULT_ENUMERATION_LIMIT };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(config("beta must be positive and finite"));
        }
        if !self.h.is_finite() {
            return Err(config("h must be finite"));
        }
        if self.enumeration_limit > 30 {
            return Err(config("enumeration limit above 30 is not supported"));
        }
        Ok(())
    }

    /// Fails with a capability error when `2^n` states are too many.
    pub fn check_enumerable(&self, n: usize) -> Result<()> {
        if n > self.enumeration_limit {
            Err(Error::Capability { n, limit: self.enumeration_limit })
        } else {
            Ok(())
        }
    }
}

fn check_dims(cm: &CouplingMatrix, s: &SpinConfig) -> Result<()> {
    if cm.n() != s.n() {
        Err(Error::Dimension { expected: cm.n(), found: s.n() })
    } else {
        Ok(())
    }
}

/// `Σ_{i<j} x_ij σ_i σ_j` for an upper-triangle array `x`.
fn pair_sum(x: &[f64], s: &SpinConfig) -> f64 {
    edges(s.n()).zip(x).map(|((i, j), &v)| v * s.spin_f64(i) * s.spin_f64(j)).sum()
}

fn energy_unchecked(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig) -> f64 {
    let n = cm.n() as f64;
    let m = 2.0 * s.up_count() as f64 - n;
    -pair_sum(cm.couplings(), s) / n - p.h * m
}

/// `H_N(σ)`.
pub fn hamiltonian(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig) -> Result<f64> {
    check_dims(cm, s)?;
    Ok(energy_unchecked(cm, p, s))
}

/// `H_N(σ^k) - H_N(σ) = 2 σ_k ((1/N) Σ_{j≠k} J_kj σ_j + h)`.
pub fn flip_delta(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig, k: usize) -> Result<f64> {
    check_dims(cm, s)?;
    let n = cm.n();
    if k >= n {
        return Err(Error::SiteOutOfRange { site: k, n });
    }
    let field: f64 = (0..n).filter(|&j| j != k).map(|j| cm.get(k, j) * s.spin_f64(j)).sum();
    Ok(2.0 * s.spin_f64(k) * (field / n as f64 + p.h))
}

/// Energies of all `2^N` configurations, indexed canonically.
pub fn energies(cm: &CouplingMatrix, p: &ModelParams) -> Result<Vec<f64>> {
    let n = cm.n();
    p.check_enumerable(n)?;
    let dense = cm.dense();
    let nf = n as f64;
    let states = 1usize << n;
    let one = |idx: usize| -> f64 {
        let spin = |i: usize| if idx >> i & 1 == 1 { 1.0 } else { -1.0 };
        let mut pair = 0.0;
        for i in 0..n {
            let row = &dense[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for (j, &jij) in row.iter().enumerate().skip(i + 1) {
                acc += jij * spin(j);
            }
            pair += spin(i) * acc;
        }
        let m = 2.0 * idx.count_ones() as f64 - nf;
        -pair / nf - p.h * m
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok((0..states).into_par_iter().map(one).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..states).map(one).collect())
    }
}

/// The enumerated energy landscape at inverse temperature `β`.
///
/// Gibbs weights are kept relative to the ground state,
/// `w(σ) = e^{-β (H(σ) - H_min)}`, so that nothing overflows at large `β`.
#[derive(Debug, Clone)]
pub struct Landscape {
    n: usize,
    beta: f64,
    energies: Vec<f64>,
    h_min: f64,
    log_z_rel: f64,
}

impl Landscape {
    pub fn new(cm: &CouplingMatrix, p: &ModelParams) -> Result<Self> {
        p.validate()?;
        Ok(Self::from_energies(cm.n(), p.beta, energies(cm, p)?))
    }

    pub fn from_energies(n: usize, beta: f64, energies: Vec<f64>) -> Self {
        assert_eq!(energies.len(), 1usize << n);
        let h_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let log_z_rel = math::log(math::sum(energies.iter().map(|&e| math::exp(-beta * (e - h_min)))));
        Self { n, beta, energies, h_min, log_z_rel }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn ground_energy(&self) -> f64 {
        self.h_min
    }

    /// `log Z_N`.
    pub fn log_partition(&self) -> f64 {
        self.log_z_rel - self.beta * self.h_min
    }

    /// `log Σ_σ w(σ)` with `w` relative to the ground state.
    pub fn log_relative_partition(&self) -> f64 {
        self.log_z_rel
    }

    pub fn relative_weight(&self, idx: usize) -> f64 {
        math::exp(-self.beta * (self.energies[idx] - self.h_min))
    }

    pub fn log_gibbs(&self, idx: usize) -> f64 {
        -self.beta * (self.energies[idx] - self.h_min) - self.log_z_rel
    }

    pub fn gibbs(&self, idx: usize) -> f64 {
        math::exp(self.log_gibbs(idx))
    }

    /// The full Gibbs vector.
    pub fn gibbs_vector(&self) -> Vec<f64> {
        (0..self.energies.len()).map(|i| self.gibbs(i)).collect()
    }
}

/// `Z_N`. May overflow to infinity at very large `β N`; prefer
/// [`log_partition_function`].
pub fn partition_function(cm: &CouplingMatrix, p: &ModelParams) -> Result<f64> {
    Ok(math::exp(log_partition_function(cm, p)?))
}

pub fn log_partition_function(cm: &CouplingMatrix, p: &ModelParams) -> Result<f64> {
    Ok(Landscape::new(cm, p)?.log_partition())
}

/// `μ_N(σ)`.
pub fn gibbs(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig) -> Result<f64> {
    check_dims(cm, s)?;
    Ok(Landscape::new(cm, p)?.gibbs(s.index() as usize))
}

/// `Δ_N(σ) = H_N(σ) - H̃_N(σ) = -(1/N) Σ_{i<j} (J_ij - E J_ij) σ_i σ_j`.
pub fn delta_energy(cm: &CouplingMatrix, s: &SpinConfig) -> Result<f64> {
    check_dims(cm, s)?;
    let n = cm.n();
    let diff = edges(n)
        .zip(cm.couplings().iter().zip(cm.means()))
        .map(|((i, j), (&x, &m))| (x - m) * s.spin_f64(i) * s.spin_f64(j));
    Ok(-diff.sum::<f64>() / n as f64)
}

/// The tolerance `a_N` of the event `Ξ(a_N) = {max_σ |Δ_N(σ)| < a_N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XiSpec {
    pub a_n: f64,
}

impl XiSpec {
    pub fn new(a_n: f64) -> Result<Self> {
        if !(a_n >= 0.0 && a_n.is_finite()) {
            return Err(config("a_N must be non-negative and finite"));
        }
        Ok(Self { a_n })
    }

    /// `a_N = sqrt(2 k_J (k_1 + log 2) N)`.
    pub fn default_rule(k_j: f64, k_1: f64, n: usize) -> Self {
        Self { a_n: math::sqrt(2.0 * k_j * (k_1 + core::f64::consts::LN_2) * n as f64) }
    }

    /// The tolerance giving `b_N = b`, i.e. `a_N = sqrt(2 k_J (b + N log 2))`.
    pub fn for_exponent(b: f64, k_j: f64, n: usize) -> Self {
        Self { a_n: math::sqrt(2.0 * k_j * (b + n as f64 * core::f64::consts::LN_2)) }
    }

    /// `b_N = a_N²/(2 k_J) - N log 2`.
    pub fn b_n(&self, k_j: f64, n: usize) -> f64 {
        self.a_n * self.a_n / (2.0 * k_j) - n as f64 * core::f64::consts::LN_2
    }

    /// `min(1, e^{-b_N})`, the bound on `P[Ξ^c]`.
    pub fn complement_bound(&self, k_j: f64, n: usize) -> f64 {
        math::exp(-self.b_n(k_j, n)).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiOutcome {
    pub in_event: bool,
    pub max_dev: f64,
}

/// `max_σ |Δ_N(σ)|` by enumeration.
pub fn max_delta(cm: &CouplingMatrix, p: &ModelParams) -> Result<f64> {
    let n = cm.n();
    p.check_enumerable(n)?;
    let diff: Vec<f64> = cm.couplings().iter().zip(cm.means()).map(|(x, m)| x - m).collect();
    if diff.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let one = |idx: u64| {
        let s = SpinConfig::from_index(n, idx).expect("index below 2^N");
        math::fabs(pair_sum(&diff, &s)) / n as f64
    };
    // Δ(σ) = Δ(-σ): half the states suffice.
    let half = 1u64 << (n - 1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok((0..half).into_par_iter().map(one).reduce(|| 0.0, f64::max))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..half).map(one).fold(0.0, f64::max))
    }
}

/// Membership in `Ξ(a_N)` (strict inequality) and the maximal deviation.
pub fn xi_check(cm: &CouplingMatrix, p: &ModelParams, xs: &XiSpec) -> Result<XiOutcome> {
    let max_dev = max_delta(cm, p)?;
    Ok(XiOutcome { in_event: max_dev < xs.a_n, max_dev })
}

/// Sign of the exponent in `E[e^{±β Δ_N(σ)}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `log E[e^{±β Δ_N(σ)} | environment]` as an exact product over edges.
pub fn conditional_log_mgf(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig, sign: Sign) -> Result<f64> {
    check_dims(cm, s)?;
    let n = cm.n();
    let scale = -sign.value() * p.beta / n as f64;
    let mut acc = math::NeumaierSum::default();
    for (i, j) in edges(n) {
        let law = cm.edge_law(i, j)?;
        let t = scale * s.spin_f64(i) * s.spin_f64(j);
        acc.add(math::log(law.centered_mgf(t)));
    }
    Ok(acc.value())
}

/// `E[e^{±β Δ_N(σ)} | environment]`.
pub fn conditional_mgf_exact(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig, sign: Sign) -> Result<f64> {
    Ok(math::exp(conditional_log_mgf(cm, p, s, sign)?))
}

/// The explicit remainder `(β k_J)³ / (2N)` bounding
/// `|log E[e^{±βΔ_N}] - α_N|`.
pub fn mgf_remainder_bound(beta: f64, k_j: f64, n: usize) -> f64 {
    let x = beta * k_j;
    x * x * x / (2.0 * n as f64)
}
