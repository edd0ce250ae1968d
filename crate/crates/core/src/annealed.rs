//! The annealed Curie–Weiss model and its magnetization-lumped chain.
//!
//! With constant mean coupling `p̄` the annealed Hamiltonian depends on
//! `σ` only through the number `k` of up spins (magnetization
//! `m = 2k/N - 1`):
//! `Ĥ(m) = -p̄ N m²/2 + p̄/2 - h N m`. The Metropolis chain therefore lumps
//! exactly onto a birth–death chain on `k ∈ {0, …, N}`, which gives
//! capacities and hitting times for `N` far beyond exact enumeration.
//!
//! The free energy per spin is
//! `F(x) = -p̄ x²/2 - h x + β^{-1} I(x) + log 2` with
//! `I(x) = (1-x)/2 log((1-x)/2) + (1+x)/2 log((1+x)/2)`.

use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::math::{self, log_add_exp, log_sum_exp};
use crate::stateset::{nearest_up_count, StateSet};

/// Parameters of the annealed Curie–Weiss free energy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FreeEnergySpec {
    pub beta: f64,
    pub h: f64,
    pub pbar: f64,
    /// Number of points of exported free-energy curves.
    pub grid: usize,
}

impl FreeEnergySpec {
    pub fn new(beta: f64, h: f64, pbar: f64) -> Result<Self> {
        let s = Self { beta, h, pbar, grid: 401 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(config("beta must be positive and finite"));
        }
        if !self.h.is_finite() || !(self.pbar >= 0.0 && self.pbar.is_finite()) {
            return Err(config("h must be finite and p̄ non-negative"));
        }
        Ok(())
    }
}

/// Binary entropy term `I(x)`, continuous at `±1`.
fn entropy_term(x: f64) -> f64 {
    math::xlogx((1.0 - x) / 2.0) + math::xlogx((1.0 + x) / 2.0)
}

/// `F(x)` for `|x| <= 1`.
pub fn free_energy(x: f64, spec: &FreeEnergySpec) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Precondition(alloc::format!("|x| = {} exceeds 1", x.abs())));
    }
    Ok(-spec.pbar * x * x / 2.0 - spec.h * x + entropy_term(x) / spec.beta + core::f64::consts::LN_2)
}

/// `F'(x)` for `|x| < 1`.
pub fn free_energy_derivative(x: f64, spec: &FreeEnergySpec) -> f64 {
    -spec.pbar * x - spec.h + math::atanh(x) / spec.beta
}

/// `F''(x)` for `|x| < 1`.
pub fn free_energy_second_derivative(x: f64, spec: &FreeEnergySpec) -> f64 {
    -spec.pbar + 1.0 / (spec.beta * (1.0 - x * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryKind {
    Minimum,
    Maximum,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationary {
    pub x: f64,
    pub kind: StationaryKind,
}

/// Stationary points of `F`, i.e. solutions of `x = tanh(β(p̄x + h))`,
/// in increasing order.
///
/// Roots are bracketed on a uniform grid in `u = atanh(x)`, where
/// `F'(tanh u) = u/β - p̄ tanh u - h` is smooth, and refined by bisection.
pub fn stationary_points(spec: &FreeEnergySpec) -> Result<Vec<Stationary>> {
    spec.validate()?;
    let g = |u: f64| u / spec.beta - spec.pbar * math::tanh(u) - spec.h;
    let reach = spec.beta * (spec.pbar + spec.h.abs()) + 1.0;
    let steps = 200_000usize;
    let du = 2.0 * reach / steps as f64;
    let mut out = Vec::new();
    let mut u0 = -reach;
    let mut g0 = g(u0);
    for i in 1..=steps {
        let u1 = -reach + i as f64 * du;
        let g1 = g(u1);
        // an exact zero at a grid point is reported once, from its own interval
        if g1 != 0.0 && (g0 == 0.0 || (g0 < 0.0) != (g1 < 0.0)) {
            let root = if g0 == 0.0 { u0 } else { bisect(&g, u0, u1) };
            let x = math::tanh(root);
            let curvature = free_energy_second_derivative(x, spec);
            let kind = if curvature > 0.0 {
                StationaryKind::Minimum
            } else if curvature < 0.0 {
                StationaryKind::Maximum
            } else {
                StationaryKind::Degenerate
            };
            if out.last().map_or(true, |s: &Stationary| s.x != x) {
                out.push(Stationary { x, kind });
            }
        }
        u0 = u1;
        g0 = g1;
    }
    Ok(out)
}

fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let neg_lo = g(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Local minima of `F`, in increasing order.
pub fn local_minima(spec: &FreeEnergySpec) -> Result<Vec<f64>> {
    Ok(stationary_points(spec)?
        .into_iter()
        .filter(|s| s.kind == StationaryKind::Minimum)
        .map(|s| s.x)
        .collect())
}

/// Closed-form critical field: `h_c = p̄ x_s - atanh(x_s)/β` with
/// `x_s = sqrt(1 - 1/(β p̄))`; for `p̄ = 1` this is
/// `sqrt(1-1/β) - (1/(2β)) log(β (1 + sqrt(1-1/β))²)`.
pub fn critical_field(beta: f64, pbar: f64) -> Result<f64> {
    if !(beta * pbar > 1.0) {
        return Err(config(alloc::format!("β p̄ = {} must exceed 1 for two phases", beta * pbar)));
    }
    let xs = math::sqrt(1.0 - 1.0 / (beta * pbar));
    Ok(pbar * xs - math::atanh(xs) / beta)
}

/// Spinodal field found numerically: the largest `h` for which
/// `F'(x) = 0` has a solution with `x < 0`, i.e. the maximum over
/// `(-1, 0)` of `q(x) = atanh(x)/β - p̄ x`, located by golden-section search.
pub fn spinodal_field(beta: f64, pbar: f64) -> Result<f64> {
    if !(beta * pbar > 1.0) {
        return Err(config(alloc::format!("β p̄ = {} must exceed 1 for two phases", beta * pbar)));
    }
    let q = |x: f64| math::atanh(x) / beta - pbar * x;
    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (-1.0 + 1e-15, 0.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut qc, mut qd) = (q(c), q(d));
    for _ in 0..200 {
        if qc > qd {
            b = d;
            d = c;
            qd = qc;
            c = b - inv_phi * (b - a);
            qc = q(c);
        } else {
            a = c;
            c = d;
            qc = qd;
            d = a + inv_phi * (b - a);
            qd = q(d);
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok(q(0.5 * (a + b)).max(qc).max(qd))
}

/// `Ĥ(k)` for `k` up spins out of `n`.
pub fn lumped_energy(n: usize, k: usize, pbar: f64, h: f64) -> f64 {
    let nf = n as f64;
    let m = 2.0 * k as f64 / nf - 1.0;
    -pbar * nf * m * m / 2.0 + pbar / 2.0 - h * nf * m
}

/// The two metastable magnetization sets at size `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetastableSets {
    /// `[M_1, M_2]`, heavier first.
    pub sets: [StateSet; 2],
    /// Up counts of the two levels.
    pub levels: [usize; 2],
    /// Grid magnetizations `m_{i,N}`.
    pub magnetizations: [f64; 2],
    /// The free-energy minima the levels were snapped from.
    pub minima: [f64; 2],
}

/// Pre-images of the grid magnetizations nearest to the two minima of `F`
/// (ties to the smaller magnetization), labeled by decreasing Gibbs weight
/// of the annealed model at size `N`.
pub fn metastable_sets(spec: &FreeEnergySpec, n: usize) -> Result<MetastableSets> {
    let minima = local_minima(spec)?;
    if minima.len() != 2 {
        return Err(Error::Precondition(alloc::format!(
            "expected two free-energy minima, found {} (single-phase regime?)",
            minima.len()
        )));
    }
    let chain = BirthDeathChain::new(n, spec.beta, spec.h, spec.pbar)?;
    let mut entries: Vec<(usize, f64)> = minima.iter().map(|&m| (nearest_up_count(n, m), m)).collect();
    if entries[0].0 == entries[1].0 {
        return Err(Error::Precondition(alloc::format!("both minima snap to the same level at N = {n}")));
    }
    entries.sort_by(|a, b| chain.log_mu(b.0).total_cmp(&chain.log_mu(a.0)));
    let level = |k: usize| 2.0 * k as f64 / n as f64 - 1.0;
    Ok(MetastableSets {
        sets: [StateSet::levels(n, [entries[0].0])?, StateSet::levels(n, [entries[1].0])?],
        levels: [entries[0].0, entries[1].0],
        magnetizations: [level(entries[0].0), level(entries[1].0)],
        minima: [entries[0].1, entries[1].1],
    })
}

/// Birth–death chain of the number of up spins under the annealed
/// Curie–Weiss dynamics. All quantities are kept in log space.
#[derive(Debug, Clone)]
pub struct BirthDeathChain {
    n: usize,
    beta: f64,
    h: f64,
    pbar: f64,
    /// `log μ̂(k)`, normalized.
    log_mu: Vec<f64>,
    /// `log Z̃_N`.
    log_z: f64,
    /// `log b(k)`, `-inf` at `k = N`.
    log_up: Vec<f64>,
    /// `log d(k)`, `-inf` at `k = 0`.
    log_down: Vec<f64>,
}

/// One row of the exported chain table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRow {
    pub m: f64,
    pub free_energy: f64,
    pub mu_hat: f64,
    pub up: f64,
    pub down: f64,
}

/// Harmonic sum, capacity and mean hitting time between two levels, as
/// logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedHitting {
    pub log_cap: f64,
    pub log_harm: f64,
    /// `log(harm / cap)`.
    pub log_via_identity: f64,
    /// From the forward elimination `v_k = (1 + d_k v_{k-1}) / b_k`.
    pub log_via_direct: f64,
}

impl BirthDeathChain {
    pub fn new(n: usize, beta: f64, h: f64, pbar: f64) -> Result<Self> {
        FreeEnergySpec { beta, h, pbar, grid: 2 }.validate()?;
        if n < 1 {
            return Err(config("N must be at least 1"));
        }
        let energy = |k: usize| lumped_energy(n, k, pbar, h);
        let raw: Vec<f64> = (0..=n).map(|k| math::log_binomial(n, k) - beta * energy(k)).collect();
        let log_z = log_sum_exp(&raw);
        let log_mu = raw.iter().map(|r| r - log_z).collect();
        let log_rate = |from: usize, to: usize| -> f64 {
            let dh = energy(to) - energy(from);
            if dh > 0.0 {
                -beta * dh
            } else {
                0.0
            }
        };
        let log_up = (0..=n)
            .map(|k| if k == n { f64::NEG_INFINITY } else { math::log((n - k) as f64) + log_rate(k, k + 1) })
            .collect();
        let log_down = (0..=n)
            .map(|k| if k == 0 { f64::NEG_INFINITY } else { math::log(k as f64) + log_rate(k, k - 1) })
            .collect();
        Ok(Self { n, beta, h, pbar, log_mu, log_z, log_up, log_down })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_mu(&self, k: usize) -> f64 {
        self.log_mu[k]
    }

    pub fn mu(&self, k: usize) -> f64 {
        math::exp(self.log_mu[k])
    }

    pub fn log_up(&self, k: usize) -> f64 {
        self.log_up[k]
    }

    pub fn log_down(&self, k: usize) -> f64 {
        self.log_down[k]
    }

    /// `log Z̃_N = log Σ_k C(N,k) e^{-β Ĥ(k)}`.
    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// Largest relative defect of `μ̂(k) b(k) = μ̂(k+1) d(k+1)`.
    pub fn detailed_balance_defect(&self) -> f64 {
        (0..self.n)
            .map(|k| {
                let diff = (self.log_mu[k] + self.log_up[k]) - (self.log_mu[k + 1] + self.log_down[k + 1]);
                math::expm1(diff.abs())
            })
            .fold(0.0, f64::max)
    }

    /// The chain seen through `k ↦ N - k`.
    fn reflected(&self) -> Self {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
        Self {
            n: self.n,
            beta: self.beta,
            h: -self.h,
            pbar: self.pbar,
            log_mu: rev(&self.log_mu),
            log_z: self.log_z,
            log_up: rev(&self.log_down),
            log_down: rev(&self.log_up),
        }
    }

    fn check_levels(&self, ka: usize, kb: usize) -> Result<()> {
        if ka > self.n || kb > self.n {
            return Err(config(alloc::format!("levels must lie in 0..={}", self.n)));
        }
        if ka == kb {
            return Err(Error::Overlap);
        }
        Ok(())
    }

    /// `log cap(ka, kb) = -log Σ_{k between} 1/(μ̂(k) b(k))`.
    pub fn log_capacity(&self, ka: usize, kb: usize) -> Result<f64> {
        self.check_levels(ka, kb)?;
        if ka > kb {
            return self.reflected().log_capacity(self.n - ka, self.n - kb);
        }
        let terms: Vec<f64> = (ka..kb).map(|k| -self.log_mu[k] - self.log_up[k]).collect();
        Ok(-log_sum_exp(&terms))
    }

    /// Harmonic sum, capacity and `E[τ_kb]` from `ka` by both routes.
    pub fn hitting(&self, ka: usize, kb: usize) -> Result<LumpedHitting> {
        self.check_levels(ka, kb)?;
        if ka > kb {
            return self.reflected().hitting(self.n - ka, self.n - kb);
        }
        // resistances R_k = 1/(μ̂ b) on the edges (k, k+1), ka <= k < kb
        let log_r: Vec<f64> = (ka..kb).map(|k| -self.log_mu[k] - self.log_up[k]).collect();
        let log_total_r = log_sum_exp(&log_r);
        let log_cap = -log_total_r;
        // suffix sums of resistances give the equilibrium potential
        let mut suffix = alloc::vec![f64::NEG_INFINITY; log_r.len() + 1];
        for i in (0..log_r.len()).rev() {
            suffix[i] = log_add_exp(suffix[i + 1], log_r[i]);
        }
        let mut terms = Vec::with_capacity(kb);
        for k in 0..kb {
            let log_h = if k <= ka { 0.0 } else { suffix[k - ka] - log_total_r };
            terms.push(self.log_mu[k] + log_h);
        }
        let log_harm = log_sum_exp(&terms);
        // v_k: expected time to go from k to k+1
        let mut log_v = f64::NEG_INFINITY;
        let mut log_sum_v = f64::NEG_INFINITY;
        for k in 0..kb {
            log_v = log_add_exp(0.0, self.log_down[k] + log_v) - self.log_up[k];
            if k >= ka {
                log_sum_v = log_add_exp(log_sum_v, log_v);
            }
        }
        Ok(LumpedHitting {
            log_cap,
            log_harm,
            log_via_identity: log_harm - log_cap,
            log_via_direct: log_sum_v,
        })
    }

    /// Chain table with the free energy at each grid magnetization.
    pub fn table(&self) -> Vec<ChainRow> {
        let spec = FreeEnergySpec { beta: self.beta, h: self.h, pbar: self.pbar, grid: self.n + 1 };
        (0..=self.n)
            .map(|k| {
                let m = 2.0 * k as f64 / self.n as f64 - 1.0;
                ChainRow {
                    m,
                    free_energy: free_energy(m.clamp(-1.0, 1.0), &spec).unwrap_or(f64::NAN),
                    mu_hat: self.mu(k),
                    up: math::exp(self.log_up[k]),
                    down: math::exp(self.log_down[k]),
                }
            })
            .collect()
    }
}

/// `(x, F(x))` on a uniform grid of `spec.grid` points over `[-1, 1]`.
pub fn free_energy_curve(spec: &FreeEnergySpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let g = spec.grid.max(2);
    (0..g)
        .map(|i| {
            let x = (-1.0 + 2.0 * i as f64 / (g - 1) as f64).clamp(-1.0, 1.0);
            free_energy(x, spec).map(|f| (x, f))
        })
        .collect()
}

/// `|-(1/(βN)) log Z̃_N - (min_x F(x) - log 2)|`; the `log 2` offset is the
/// constant carried by `F`.
pub fn free_energy_gap(spec: &FreeEnergySpec, n: usize) -> Result<f64> {
    let chain = BirthDeathChain::new(n, spec.beta, spec.h, spec.pbar)?;
    let mut candidates: Vec<f64> = stationary_points(spec)?.iter().map(|s| s.x).collect();
    candidates.extend([-1.0, 1.0]);
    let min_f = candidates
        .iter()
        .map(|&x| free_energy(x, spec))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let per_spin = -chain.log_partition() / (spec.beta * n as f64);
    Ok((per_spin - (min_f - core::f64::consts::LN_2)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(beta: f64, h: f64) -> FreeEnergySpec {
        FreeEnergySpec::new(beta, h, 1.0).unwrap()
    }

    #[test]
    fn free_energy_values() {
        let s = spec(1.0, 0.0);
        assert!(free_energy(0.0, &s).unwrap().abs() < 1e-15);
        let at_one = -0.5 + core::f64::consts::LN_2;
        assert!((free_energy(1.0, &spec(3.0, 0.0)).unwrap() - at_one).abs() < 1e-15);
        assert!((at_one - 0.1931472).abs() < 1e-7);
        let s2 = spec(2.0, 0.0);
        for x in [0.1, 0.5, 0.93] {
            assert_eq!(free_energy(x, &s2).unwrap(), free_energy(-x, &s2).unwrap());
        }
        assert!(free_energy(1.01, &s2).is_err());
        // F(0) = log 2 (1 - 1/β) in general
        let f0 = free_energy(0.0, &s2).unwrap();
        assert!((f0 - core::f64::consts::LN_2 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn minima_at_beta_two() {
        // fixed-point iteration of m = tanh(2m) as an independent oracle
        let mut m: f64 = 1.0;
        for _ in 0..200 {
            m = libm::tanh(2.0 * m);
        }
        let mins = local_minima(&spec(2.0, 0.0)).unwrap();
        assert_eq!(mins.len(), 2);
        assert!((mins[1] - m).abs() < 1e-12);
        assert!((mins[0] + m).abs() < 1e-12);
        assert!((m - 0.9575040).abs() < 1e-6);
    }

    #[test]
    fn subcritical_single_minimum() {
        let pts = stationary_points(&spec(0.5, 0.0)).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, StationaryKind::Minimum);
        assert!(pts[0].x.abs() < 1e-12);
    }

    #[test]
    fn small_field_favors_its_sign() {
        let s = spec(1.5, 0.05);
        let mins = local_minima(&s).unwrap();
        assert_eq!(mins.len(), 2);
        let (fneg, fpos) = (free_energy(mins[0], &s).unwrap(), free_energy(mins[1], &s).unwrap());
        assert!(fpos < fneg);
        assert!(mins[1] > -mins[0]);
    }

    #[test]
    fn critical_field_closed_forms_agree() {
        for beta in [1.2, 1.5, 2.0, 3.0] {
            let xs = libm::sqrt(1.0 - 1.0 / beta);
            let printed = xs - libm::log(beta * (1.0 + xs) * (1.0 + xs)) / (2.0 * beta);
            let hc = critical_field(beta, 1.0).unwrap();
            assert!((hc - printed).abs() < 1e-14);
            assert!((hc - spinodal_field(beta, 1.0).unwrap()).abs() < 1e-8);
        }
        let hc2 = critical_field(2.0, 1.0).unwrap();
        assert!((hc2 - 0.266419988).abs() < 1e-8);
        assert!(critical_field(1.0 + 1e-9, 1.0).unwrap() < 1e-6);
        assert!(critical_field(0.5, 1.0).is_err());
    }

    #[test]
    fn minima_vanish_past_critical_field() {
        let hc = critical_field(2.0, 1.0).unwrap();
        assert_eq!(local_minima(&spec(2.0, hc - 1e-3)).unwrap().len(), 2);
        assert_eq!(local_minima(&spec(2.0, hc + 1e-3)).unwrap().len(), 1);
    }

    #[test]
    fn metastable_sets_symmetric_at_zero_field() {
        let ms = metastable_sets(&spec(2.0, 0.0), 12).unwrap();
        assert_eq!(ms.magnetizations[0], -ms.magnetizations[1]);
        let ms = metastable_sets(&spec(1.5, 0.05), 12).unwrap();
        assert!(!ms.sets[0].intersects(&ms.sets[1]));
        for i in 0..2 {
            let k = ms.levels[i];
            assert!((ms.sets[i].cardinality() - libm::exp(math::log_binomial(12, k))).abs() < 1e-9);
        }
        // positive field: the + phase is heavier
        assert!(ms.magnetizations[0] > 0.0);
        assert!(metastable_sets(&spec(0.5, 0.0), 12).is_err());
    }

    #[test]
    fn lumped_chain_basics() {
        let c = BirthDeathChain::new(30, 1.5, 0.05, 1.0).unwrap();
        assert!(c.detailed_balance_defect() < 1e-12);
        let total: f64 = (0..=30).map(|k| c.mu(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // single edge
        let cap = c.log_capacity(10, 11).unwrap();
        assert!((cap - (c.log_mu(10) + c.log_up(10))).abs() < 1e-13);
        assert!((c.log_capacity(11, 10).unwrap() - cap).abs() < 1e-13);
    }

    #[test]
    fn lumped_routes_agree_and_scale() {
        for n in [12usize, 200, 10_000] {
            let c = BirthDeathChain::new(n, 1.5, 0.05, 1.0).unwrap();
            let ms = metastable_sets(&spec(1.5, 0.05), n).unwrap();
            let hit = c.hitting(ms.levels[1], ms.levels[0]).unwrap();
            assert!(hit.log_via_direct.is_finite());
            assert!(math::expm1((hit.log_via_direct - hit.log_via_identity).abs()) < 1e-10, "N = {n}");
            let back = c.hitting(ms.levels[0], ms.levels[1]).unwrap();
            assert!(math::expm1((back.log_via_direct - back.log_via_identity).abs()) < 1e-10);
        }
    }

    #[test]
    fn hitting_time_grows_with_beta() {
        let mut last = f64::NEG_INFINITY;
        for beta in [1.2, 1.5, 2.0] {
            let c = BirthDeathChain::new(40, beta, 0.02, 1.0).unwrap();
            let ms = metastable_sets(&spec(beta, 0.02), 40).unwrap();
            let t = c.hitting(ms.levels[1], ms.levels[0]).unwrap().log_via_identity;
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn free_energy_gap_shrinks() {
        for (beta, h) in [(0.5, 0.0), (1.5, 0.0), (2.0, 0.0), (2.0, 0.1), (3.0, 0.05)] {
            let s = spec(beta, h);
            let gaps: Vec<f64> = (8..=20).map(|n| free_energy_gap(&s, n).unwrap()).collect();
            for w in gaps.windows(2) {
                assert!(w[1] < w[0], "beta {beta} h {h}: {gaps:?}");
            }
        }
        // Close to coexistence the second well inflates Z̃ at small N and
        // the gap only starts to fall from N = 14 on.
        let s = spec(1.5, 0.05);
        let gaps: Vec<f64> = (14..=20).map(|n| free_energy_gap(&s, n).unwrap()).collect();
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "{gaps:?}");
        }
    }
}
