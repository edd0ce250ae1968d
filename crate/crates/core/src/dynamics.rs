//! Continuous-time Glauber–Metropolis dynamics.
//!
//! The chain jumps from `σ` to `σ^k` at rate `e^{-β [H(σ^k) - H(σ)]_+}`.
//! [`Glauber`] simulates it event by event: holding times are exponential
//! with the total rate and the flipped site is chosen proportionally to its
//! rate, so there is no time discretization. Local fields
//! `g_k = (1/N) Σ_j J_kj σ_j + h` are cached and updated in `O(N)` per jump.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::disorder::CouplingMatrix;
use crate::error::{Error, Result};
use crate::math;
use crate::model::{Landscape, ModelParams};
use crate::rng;
use crate::spin::SpinConfig;
use crate::stateset::StateSet;

/// Default cap on the number of jumps of one hitting run.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// Fields are recomputed from scratch after this many incremental updates.
const REFRESH_PERIOD: u64 = 1 << 16;

/// `e^{-β max(ΔH, 0)}`.
#[inline]
pub fn metropolis_rate(delta_h: f64, beta: f64) -> f64 {
    if delta_h <= 0.0 {
        1.0
    } else {
        math::exp(-beta * delta_h)
    }
}

/// Per-site flip rates at a configuration and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateQuery {
    pub state: SpinConfig,
    pub rates: Vec<f64>,
    pub total: f64,
}

/// Flip rates out of `σ`.
pub fn rates(cm: &CouplingMatrix, p: &ModelParams, s: &SpinConfig) -> Result<RateQuery> {
    let sim = Glauber::new(cm, p, *s)?;
    Ok(RateQuery { state: *s, rates: sim.rates.clone(), total: sim.total })
}

/// One jump of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Time at which the jump happened.
    pub time: f64,
    pub holding_time: f64,
    pub site: usize,
    pub state: SpinConfig,
}

/// Event-driven simulator of one trajectory.
#[derive(Debug, Clone)]
pub struct Glauber {
    n: usize,
    beta: f64,
    h: f64,
    couplings: Vec<f64>,
    state: SpinConfig,
    fields: Vec<f64>,
    rates: Vec<f64>,
    total: f64,
    time: f64,
    jumps: u64,
    since_refresh: u64,
}

impl Glauber {
    pub fn new(cm: &CouplingMatrix, p: &ModelParams, start: SpinConfig) -> Result<Self> {
        p.validate()?;
        if start.n() != cm.n() {
            return Err(Error::Dimension { expected: cm.n(), found: start.n() });
        }
        let n = cm.n();
        let mut sim = Self {
            n,
            beta: p.beta,
            h: p.h,
            couplings: cm.dense(),
            state: start,
            fields: alloc::vec![0.0; n],
            rates: alloc::vec![0.0; n],
            total: 0.0,
            time: 0.0,
            jumps: 0,
            since_refresh: 0,
        };
        sim.refresh_fields();
        Ok(sim)
    }

    fn refresh_fields(&mut self) {
        let n = self.n;
        for k in 0..n {
            let row = &self.couplings[k * n..(k + 1) * n];
            let s: f64 = row.iter().enumerate().map(|(j, &x)| x * self.state.spin_f64(j)).sum();
            self.fields[k] = s / n as f64 + self.h;
        }
        self.since_refresh = 0;
        self.refresh_rates();
    }

    fn refresh_rates(&mut self) {
        for k in 0..self.n {
            let dh = 2.0 * self.state.spin_f64(k) * self.fields[k];
            self.rates[k] = metropolis_rate(dh, self.beta);
        }
        self.total = self.rates.iter().sum();
    }

    /// Restarts the trajectory at `s` with the clock at zero.
    pub fn reset(&mut self, s: SpinConfig) -> Result<()> {
        if s.n() != self.n {
            return Err(Error::Dimension { expected: self.n, found: s.n() });
        }
        self.state = s;
        self.time = 0.0;
        self.jumps = 0;
        self.refresh_fields();
        Ok(())
    }

    pub fn state(&self) -> SpinConfig {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    /// Flips spin `k` and updates the cached fields and rates.
    fn apply_flip(&mut self, k: usize) {
        self.state = self.state.flipped(k).expect("site in range");
        let n = self.n;
        let new_spin = self.state.spin_f64(k);
        let scale = 2.0 * new_spin / n as f64;
        let row = &self.couplings[k * n..(k + 1) * n];
        for (g, &x) in self.fields.iter_mut().zip(row) {
            *g += scale * x;
        }
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_PERIOD {
            self.refresh_fields();
        } else {
            self.refresh_rates();
        }
    }

    /// Samples a holding time and a site, and performs the jump.
    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Jump {
        let holding = -math::log(rng::open_unit_f64(rng)) / self.total;
        let mut u = rng::unit_f64(rng) * self.total;
        let mut site = self.n - 1;
        for (k, &r) in self.rates.iter().enumerate() {
            if u < r {
                site = k;
                break;
            }
            u -= r;
        }
        // rounding can leave u just above the last positive rate
        while self.rates[site] == 0.0 && site > 0 {
            site -= 1;
        }
        self.apply_flip(site);
        self.time += holding;
        self.jumps += 1;
        Jump { time: self.time, holding_time: holding, site, state: self.state }
    }
}

/// Elapsed time and jump count of a completed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingSample {
    pub elapsed_time: f64,
    pub jump_count: u64,
    /// Whether the trajectory left its start set before stopping.
    pub exit_flag: bool,
}

/// Result of a budgeted run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    Completed(T),
    /// The jump budget ran out; the partial trajectory is reported so that
    /// callers can censor or resample.
    Truncated { elapsed_time: f64, jump_count: u64 },
}

impl<T> Outcome<T> {
    pub fn completed(self) -> Option<T> {
        match self {
            Outcome::Completed(t) => Some(t),
            Outcome::Truncated { .. } => None,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Outcome::Truncated { .. })
    }
}

/// Initial condition of a hitting run.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a> {
    State(SpinConfig),
    /// Finite law given as `(state, weight)` pairs; weights need not be
    /// normalized.
    Law(&'a [(SpinConfig, f64)]),
}

impl Start<'_> {
    fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<SpinConfig> {
        match self {
            Start::State(s) => Ok(*s),
            Start::Law(law) => {
                let total: f64 = law.iter().map(|(_, w)| *w).sum();
                if law.is_empty() || !(total > 0.0) || law.iter().any(|(_, w)| !(*w >= 0.0)) {
                    return Err(Error::Precondition("initial law needs non-negative weights with positive sum".into()));
                }
                let mut u = rng::unit_f64(rng) * total;
                for (s, w) in law.iter() {
                    if u < *w {
                        return Ok(*s);
                    }
                    u -= w;
                }
                Ok(law.iter().rev().find(|(_, w)| *w > 0.0).expect("positive total").0)
            }
        }
    }
}

/// Optional per-jump callback for trajectory dumps.
pub type Observer<'a> = Option<&'a mut dyn FnMut(&Jump)>;

/// Simulates from `start` until the first entrance into `target`.
pub fn first_hitting<R: RngCore + ?Sized>(
    cm: &CouplingMatrix,
    p: &ModelParams,
    start: Start<'_>,
    target: &StateSet,
    budget: u64,
    rng: &mut R,
    mut observer: Observer<'_>,
) -> Result<Outcome<HittingSample>> {
    if target.n() != cm.n() {
        return Err(Error::Dimension { expected: cm.n(), found: target.n() });
    }
    if target.is_empty() {
        return Err(Error::EmptySet("target"));
    }
    let s0 = start.sample(rng)?;
    if target.contains(&s0) {
        return Err(Error::Precondition("start lies in the target; use first_return".into()));
    }
    let mut sim = Glauber::new(cm, p, s0)?;
    while sim.jumps < budget {
        let jump = sim.step(rng);
        if let Some(obs) = observer.as_mut() {
            obs(&jump);
        }
        if target.contains(&jump.state) {
            return Ok(Outcome::Completed(HittingSample {
                elapsed_time: sim.time,
                jump_count: sim.jumps,
                exit_flag: true,
            }));
        }
    }
    Ok(Outcome::Truncated { elapsed_time: sim.time, jump_count: sim.jumps })
}

/// A return-time run: whether `B` was entered before `A` was re-entered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSample {
    pub hit_b_first: bool,
    pub sample: HittingSample,
}

/// Starts at `s0 ∈ A` and runs until the chain enters `B`, or enters `A`
/// from outside, whichever comes first. Moves inside `A` do not count as
/// returns.
pub fn first_return<R: RngCore + ?Sized>(
    cm: &CouplingMatrix,
    p: &ModelParams,
    s0: SpinConfig,
    a: &StateSet,
    b: &StateSet,
    budget: u64,
    rng: &mut R,
) -> Result<Outcome<ReturnSample>> {
    crate::stateset::check_disjoint(cm.n(), &[a, b])?;
    if !a.contains(&s0) {
        return Err(Error::Precondition("start must lie in A".into()));
    }
    let mut sim = Glauber::new(cm, p, s0)?;
    let mut inside_a = true;
    let mut left_a = false;
    while sim.jumps < budget {
        let jump = sim.step(rng);
        let now_in_a = a.contains(&jump.state);
        left_a |= !now_in_a;
        let done = if b.contains(&jump.state) {
            Some(true)
        } else if now_in_a && !inside_a {
            Some(false)
        } else {
            None
        };
        if let Some(hit_b_first) = done {
            return Ok(Outcome::Completed(ReturnSample {
                hit_b_first,
                sample: HittingSample { elapsed_time: sim.time, jump_count: sim.jumps, exit_flag: left_a },
            }));
        }
        inside_a = now_in_a;
    }
    Ok(Outcome::Truncated { elapsed_time: sim.time, jump_count: sim.jumps })
}

/// Largest relative violation of `Z μ(σ) p(σ,σ^k) = e^{-β max(H(σ), H(σ^k))}`
/// over all neighbor pairs, with `Z`, `μ` and `p` evaluated separately.
pub fn detailed_balance_defect(land: &Landscape) -> f64 {
    let n = land.n();
    let beta = land.beta();
    let z = math::exp(land.log_partition());
    let e = land.energies();
    let mut worst: f64 = 0.0;
    for s in 0..e.len() {
        let mu = land.gibbs(s);
        for k in 0..n {
            let t = s ^ (1 << k);
            let lhs = z * mu * metropolis_rate(e[t] - e[s], beta);
            let rhs = math::exp(-beta * e[s].max(e[t]));
            worst = worst.max(math::rel_diff(lhs, rhs));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_couplings, DisorderSpec, RandomSeed};
    use crate::rng::{stream, Domain};

    #[test]
    fn rate_values() {
        assert_eq!(metropolis_rate(-3.0, 1.0), 1.0);
        assert_eq!(metropolis_rate(0.0, 1.0), 1.0);
        assert!(math::fabs(metropolis_rate(2.0, 1.0) - 0.1353353) < 1e-7);
        assert!(metropolis_rate(1.0, 5.0) < metropolis_rate(1.0, 4.0));
    }

    #[test]
    fn free_dynamics_rates() {
        let cm = CouplingMatrix::constant(5, 0.0, 1.0).unwrap();
        let q = rates(&cm, &ModelParams::new(1.0, 0.0).unwrap(), &SpinConfig::all_up(5)).unwrap();
        assert!(q.rates.iter().all(|&r| r == 1.0));
        assert_eq!(q.total, 5.0);
    }

    #[test]
    fn cached_fields_track_flips() {
        let cm = sample_couplings(&DisorderSpec::erdos_renyi(0.5, 1.0), 10, RandomSeed::new(2, 0)).unwrap();
        let p = ModelParams::new(1.2, 0.1).unwrap();
        let mut sim = Glauber::new(&cm, &p, SpinConfig::all_down(10)).unwrap();
        let mut r = stream(1, 0, Domain::Auxiliary);
        for _ in 0..500 {
            sim.step(&mut r);
        }
        let fresh = rates(&cm, &p, &sim.state()).unwrap();
        for (a, b) in fresh.rates.iter().zip(sim.rates()) {
            assert!(math::fabs(a - b) < 1e-12);
        }
        for k in 0..10 {
            let dh = crate::model::flip_delta(&cm, &p, &sim.state(), k).unwrap();
            assert!(math::fabs(metropolis_rate(dh, p.beta) - sim.rates()[k]) < 1e-12);
        }
    }

    #[test]
    fn start_in_target_is_rejected() {
        let cm = CouplingMatrix::constant(3, 1.0, 1.0).unwrap();
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let target = StateSet::levels(3, [3]).unwrap();
        let mut r = stream(0, 0, Domain::Auxiliary);
        let out = first_hitting(&cm, &p, Start::State(SpinConfig::all_up(3)), &target, 10, &mut r, None);
        assert!(matches!(out, Err(Error::Precondition(_))));
    }

    #[test]
    fn budget_truncation_is_reported() {
        let cm = CouplingMatrix::constant(8, 1.0, 1.0).unwrap();
        let p = ModelParams::new(3.0, 0.0).unwrap();
        let target = StateSet::levels(8, [8]).unwrap();
        let mut r = stream(0, 0, Domain::Auxiliary);
        let out = first_hitting(&cm, &p, Start::State(SpinConfig::all_down(8)), &target, 5, &mut r, None).unwrap();
        assert!(matches!(out, Outcome::Truncated { jump_count: 5, .. }));
    }

    #[test]
    fn complement_return_is_one_jump() {
        let cm = sample_couplings(&DisorderSpec::erdos_renyi(0.5, 1.0), 4, RandomSeed::new(0, 0)).unwrap();
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let a = StateSet::from_indices(4, [5]).unwrap();
        let b = StateSet::from_indices(4, (0..16).filter(|&i| i != 5)).unwrap();
        let mut r = stream(4, 0, Domain::Auxiliary);
        for _ in 0..20 {
            let s = first_return(&cm, &p, SpinConfig::from_index(4, 5).unwrap(), &a, &b, 100, &mut r)
                .unwrap()
                .completed()
                .unwrap();
            assert!(s.hit_b_first);
            assert_eq!(s.sample.jump_count, 1);
        }
    }

    #[test]
    fn observer_sees_every_jump() {
        let cm = CouplingMatrix::constant(4, 0.0, 1.0).unwrap();
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let target = StateSet::levels(4, [4]).unwrap();
        let mut r = stream(9, 0, Domain::Auxiliary);
        let mut seen = 0u64;
        let mut obs = |_: &Jump| seen += 1;
        let out = first_hitting(&cm, &p, Start::State(SpinConfig::all_down(4)), &target, 1_000_000, &mut r, Some(&mut obs))
            .unwrap()
            .completed()
            .unwrap();
        assert_eq!(seen, out.jump_count);
    }

    #[test]
    fn detailed_balance_holds() {
        let cm = sample_couplings(&DisorderSpec::erdos_renyi(0.5, 1.0), 8, RandomSeed::new(6, 1)).unwrap();
        let land = Landscape::new(&cm, &ModelParams::new(1.4, 0.1).unwrap()).unwrap();
        assert!(detailed_balance_defect(&land) < 1e-12);
    }
}
