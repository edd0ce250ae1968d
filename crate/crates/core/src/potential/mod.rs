//! Exact potential theory for the Metropolis chain on `{-1,+1}^N`.
//!
//! All quantities are computed on the full state space from the energy
//! landscape. Internally the chain is described by its conductances
//! `c(σ,σ^k) = e^{-β (max(H(σ),H(σ^k)) - H_min)}` and relative weights
//! `w(σ) = e^{-β (H(σ) - H_min)}`, so that `μ(σ) p(σ,σ^k) = c(σ,σ^k)/Z'`
//! with `Z' = Σ w`. Boundary value problems become symmetric positive
//! definite systems in the conductance Laplacian and are solved by
//! preconditioned conjugate gradients.
//!
//! Escape probabilities from a set are rate-weighted:
//! `e_A(σ) = Σ_k p(σ,σ^k) (1 - h_{A,B}(σ^k))`, which makes
//! `cap(A,B) = Σ_{σ∈A} μ(σ) e_A(σ)` equal to the Dirichlet energy of
//! `h_{A,B}`. Dividing by the total jump rate gives the jump-chain
//! probability `P_σ[τ_B < τ_A]`.

mod flow;
mod solver;
mod spectral;

use alloc::vec::Vec;

pub use flow::Flow;
pub use solver::SolveStats;
pub use spectral::{
    sandwich_check, Certificate, EigenResult, MetaSpec, Partition, SandwichEntry, SandwichReport, SingletonScan,
    TIE_TOLERANCE,
};

use crate::disorder::CouplingMatrix;
use crate::dynamics::metropolis_rate;
use crate::error::{Error, Result};
use crate::math;
use crate::model::{Landscape, ModelParams};
use crate::stateset::{check_disjoint, StateSet};
use solver::{pcg, scaled_residual, CgOptions, Laplacian};

/// The Metropolis chain on the enumerated state space.
#[derive(Debug, Clone)]
pub struct ExactChain {
    land: Landscape,
    w: Vec<f64>,
    z_rel: f64,
    cond: Vec<f64>,
    diag: Vec<f64>,
}

/// Equilibrium potential of a pair `(A, B)` and everything derived from it.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    /// `h_{A,B}` over all states: 1 on `A`, 0 on `B`.
    pub h: Vec<f64>,
    /// `cap(A,B)` as the Dirichlet energy of `h`.
    pub cap: f64,
    /// `cap(A,B)` as the `μ`-weighted escape mass out of `A`.
    pub cap_escape: f64,
    /// `log(Z_N cap(A,B))`.
    pub log_z_cap: f64,
    /// Harmonic sum `Σ_σ μ(σ) h(σ)`.
    pub harm: f64,
    /// `log(Z_N Σ_σ μ(σ) h(σ))`.
    pub log_z_harm: f64,
    /// Last-exit distribution `ν_{A,B}` as `(state, probability)` over `A`.
    pub nu: Vec<(u64, f64)>,
    pub stats: SolveStats,
}

impl PotentialSolution {
    /// `E_ν[τ_B] = ‖h‖_{ℓ¹(μ)} / cap`.
    pub fn mean_hitting_time(&self) -> f64 {
        self.harm / self.cap
    }

    pub fn log_mean_hitting_time(&self) -> f64 {
        self.log_z_harm - self.log_z_cap
    }
}

/// The two evaluations of `E_{ν_{A,B}}[τ_B]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanHitting {
    /// Harmonic sum over capacity.
    pub via_identity: f64,
    /// Solution of `L u = -1` off `B`, averaged under `ν_{A,B}`.
    pub via_direct: f64,
}

impl ExactChain {
    pub fn new(cm: &CouplingMatrix, p: &ModelParams) -> Result<Self> {
        Ok(Self::from_landscape(Landscape::new(cm, p)?))
    }

    pub fn from_landscape(land: Landscape) -> Self {
        let n = land.n();
        let beta = land.beta();
        let e = land.energies();
        let h_min = land.ground_energy();
        let states = e.len();
        let w: Vec<f64> = (0..states).map(|s| land.relative_weight(s)).collect();
        let z_rel = math::sum(w.iter().copied());
        let mut cond = alloc::vec![0.0; states * n];
        for s in 0..states {
            for k in 0..n {
                let t = s ^ (1 << k);
                cond[s * n + k] = math::exp(-beta * (e[s].max(e[t]) - h_min));
            }
        }
        let diag = cond.chunks_exact(n.max(1)).map(|row| row.iter().sum()).collect();
        Self { land, w, z_rel, cond, diag }
    }

    pub fn landscape(&self) -> &Landscape {
        &self.land
    }

    pub fn n(&self) -> usize {
        self.land.n()
    }

    pub fn states(&self) -> usize {
        self.w.len()
    }

    /// `log Z_N`.
    pub fn log_partition(&self) -> f64 {
        self.land.log_partition()
    }

    pub fn gibbs(&self, s: usize) -> f64 {
        self.w[s] / self.z_rel
    }

    /// `p(σ, σ^k)`.
    pub fn rate(&self, s: usize, k: usize) -> f64 {
        let e = self.land.energies();
        metropolis_rate(e[s ^ (1 << k)] - e[s], self.land.beta())
    }

    /// Total jump rate out of `σ`.
    pub fn total_rate(&self, s: usize) -> f64 {
        (0..self.n()).map(|k| self.rate(s, k)).sum()
    }

    /// `μ[X]`.
    pub fn measure(&self, x: &StateSet) -> Result<f64> {
        Ok(math::exp(self.log_z_measure(x)? - self.log_partition()))
    }

    /// `log(Z_N μ[X])`.
    pub fn log_z_measure(&self, x: &StateSet) -> Result<f64> {
        self.check_set(x)?;
        let ind = x.indicator()?;
        let s = math::sum(self.w.iter().zip(&ind).filter(|(_, &b)| b).map(|(w, _)| *w));
        Ok(math::log(s) - self.land.beta() * self.land.ground_energy())
    }

    fn check_set(&self, x: &StateSet) -> Result<()> {
        if x.n() != self.n() {
            return Err(Error::Dimension { expected: self.n(), found: x.n() });
        }
        Ok(())
    }

    fn cond_row(&self, s: usize) -> &[f64] {
        &self.cond[s * self.n()..(s + 1) * self.n()]
    }

    /// `Σ_σ Σ_k c (f(σ) - f(σ^k))² / 2`, i.e. `Z'` times the Dirichlet form.
    fn energy_rel(&self, f: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = math::NeumaierSum::default();
        for s in 0..self.states() {
            for (k, &c) in self.cond_row(s).iter().enumerate() {
                let t = s ^ (1 << k);
                if t > s {
                    let d = f[s] - f[t];
                    acc.add(c * d * d);
                }
            }
        }
        let _ = n;
        acc.value()
    }

    /// Dirichlet form `E(f) = ½ Σ μ(σ) p(σ,σ') (f(σ) - f(σ'))²`, no
    /// boundary checks.
    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.states() {
            return Err(Error::Dimension { expected: self.states(), found: f.len() });
        }
        Ok(self.energy_rel(f) / self.z_rel)
    }

    /// Dirichlet form of a function required to be 1 on `A` and 0 on `B`.
    pub fn dirichlet_energy_on(&self, f: &[f64], a: &StateSet, b: &StateSet) -> Result<f64> {
        check_disjoint(self.n(), &[a, b])?;
        if f.len() != self.states() {
            return Err(Error::Dimension { expected: self.states(), found: f.len() });
        }
        let (ia, ib) = (a.indicator()?, b.indicator()?);
        for s in 0..self.states() {
            if (ia[s] && f[s] != 1.0) || (ib[s] && f[s] != 0.0) {
                return Err(Error::Boundary { state: s });
            }
        }
        self.dirichlet_energy(f)
    }

    /// Solves the boundary value problem for `h_{A,B}` and derives the
    /// capacity, harmonic sum and last-exit distribution.
    pub fn solve(&self, a: &StateSet, b: &StateSet) -> Result<PotentialSolution> {
        check_disjoint(self.n(), &[a, b])?;
        let (ia, ib) = (a.indicator()?, b.indicator()?);
        let states = self.states();
        let n = self.n();
        let free: Vec<bool> = (0..states).map(|s| !ia[s] && !ib[s]).collect();
        let mut rhs = alloc::vec![0.0; states];
        let mut h = alloc::vec![0.0; states];
        for s in 0..states {
            if ia[s] {
                h[s] = 1.0;
            } else if free[s] {
                rhs[s] = self
                    .cond_row(s)
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| ia[s ^ (1 << k)])
                    .map(|(_, c)| c)
                    .sum();
            }
        }
        // start from the fraction of conductance leading into A
        for s in 0..states {
            if free[s] {
                h[s] = rhs[s] / self.diag[s];
            }
        }
        let op = Laplacian { n, cond: &self.cond, diag: &self.diag, free: &free };
        let measure = |x: &[f64], r: &[f64]| -> f64 {
            let mut full = x.to_vec();
            for s in 0..states {
                if ia[s] {
                    full[s] = 1.0;
                }
            }
            let flux = self.energy_rel(&full);
            let l1: f64 = r.iter().map(|v| v.abs()).sum();
            scaled_residual(&op, x, r).max(l1 / flux)
        };
        let mut x: Vec<f64> = h.iter().zip(&free).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
        let stats = pcg(&op, &rhs, &mut x, CgOptions::default(), &measure)?;
        for s in 0..states {
            if free[s] {
                h[s] = x[s].clamp(0.0, 1.0);
            }
        }
        let energy = self.energy_rel(&h);
        // escape mass out of A
        let mut esc_total = math::NeumaierSum::default();
        let mut nu = Vec::new();
        for s in 0..states {
            if !ia[s] {
                continue;
            }
            let e: f64 = self
                .cond_row(s)
                .iter()
                .enumerate()
                .map(|(k, &c)| c * (1.0 - h[s ^ (1 << k)]))
                .sum();
            esc_total.add(e);
            nu.push((s as u64, e));
        }
        let esc_total = esc_total.value();
        for entry in nu.iter_mut() {
            entry.1 /= esc_total;
        }
        let harm_rel = math::sum(self.w.iter().zip(&h).map(|(w, h)| w * h));
        let shift = self.land.beta() * self.land.ground_energy();
        Ok(PotentialSolution {
            cap: energy / self.z_rel,
            cap_escape: esc_total / self.z_rel,
            log_z_cap: math::log(energy) - shift,
            harm: harm_rel / self.z_rel,
            log_z_harm: math::log(harm_rel) - shift,
            h,
            nu,
            stats,
        })
    }

    /// `h_{A,B}`.
    pub fn equilibrium_potential(&self, a: &StateSet, b: &StateSet) -> Result<Vec<f64>> {
        Ok(self.solve(a, b)?.h)
    }

    /// `cap(A,B)`.
    pub fn capacity(&self, a: &StateSet, b: &StateSet) -> Result<f64> {
        Ok(self.solve(a, b)?.cap)
    }

    /// `‖h_{A,B}‖_{ℓ¹(μ)}`.
    pub fn harmonic_sum(&self, a: &StateSet, b: &StateSet) -> Result<f64> {
        Ok(self.solve(a, b)?.harm)
    }

    /// `ν_{A,B}`.
    pub fn last_exit_distribution(&self, a: &StateSet, b: &StateSet) -> Result<Vec<(u64, f64)>> {
        Ok(self.solve(a, b)?.nu)
    }

    /// Rate-weighted escape `Σ_k p(σ,σ^k)(1 - h(σ^k))` at each `σ ∈ A`.
    pub fn escape_rates(&self, sol: &PotentialSolution) -> Vec<(u64, f64)> {
        sol.nu
            .iter()
            .map(|&(s, _)| {
                let s = s as usize;
                let e = (0..self.n()).map(|k| self.rate(s, k) * (1.0 - sol.h[s ^ (1 << k)])).sum();
                (s as u64, e)
            })
            .collect()
    }

    /// Expected hitting times of `B` from every state, solving
    /// `L u = -1` off `B` with `u = 0` on `B`.
    pub fn hitting_times(&self, b: &StateSet) -> Result<Vec<f64>> {
        self.check_set(b)?;
        if b.is_empty() {
            return Err(Error::EmptySet("B"));
        }
        let ib = b.indicator()?;
        let states = self.states();
        let free: Vec<bool> = ib.iter().map(|&x| !x).collect();
        let rhs: Vec<f64> = (0..states).map(|s| if free[s] { self.w[s] } else { 0.0 }).collect();
        let op = Laplacian { n: self.n(), cond: &self.cond, diag: &self.diag, free: &free };
        let mass: f64 = math::sum(rhs.iter().copied());
        let measure = |x: &[f64], r: &[f64]| -> f64 {
            let l1: f64 = r.iter().map(|v| v.abs()).sum();
            scaled_residual(&op, x, r).max(l1 / mass)
        };
        // initial guess: mean holding time
        let mut u: Vec<f64> = (0..states).map(|s| if free[s] { self.w[s] / self.diag[s] } else { 0.0 }).collect();
        pcg(&op, &rhs, &mut u, CgOptions { tol: 1e-14, ..CgOptions::default() }, &measure)?;
        Ok(u)
    }

    /// `E_{ν_{A,B}}[τ_B]` by both routes.
    pub fn mean_hitting_time(&self, a: &StateSet, b: &StateSet) -> Result<MeanHitting> {
        let sol = self.solve(a, b)?;
        let u = self.hitting_times(b)?;
        let direct = math::sum(sol.nu.iter().map(|&(s, p)| p * u[s as usize]));
        Ok(MeanHitting { via_identity: sol.mean_hitting_time(), via_direct: direct })
    }

    /// The harmonic unit flow `φ*(σ,σ') = μ(σ)p(σ,σ')(h(σ) - h(σ'))/cap`.
    pub fn harmonic_flow(&self, sol: &PotentialSolution) -> Flow {
        let n = self.n();
        let energy = sol.cap * self.z_rel;
        let mut values = alloc::vec![0.0; self.states() * n];
        for s in 0..self.states() {
            for (k, &c) in self.cond_row(s).iter().enumerate() {
                values[s * n + k] = c * (sol.h[s] - sol.h[s ^ (1 << k)]) / energy;
            }
        }
        Flow::from_values(n, values)
    }

    /// Thomson energy `D(φ) = ½ Σ φ(σ,σ')² / (μ(σ) p(σ,σ'))` of a unit
    /// `A`-`B` flow; the flow invariants are checked first.
    pub fn thomson_energy(&self, flow: &Flow, a: &StateSet, b: &StateSet) -> Result<f64> {
        check_disjoint(self.n(), &[a, b])?;
        flow.validate(a, b)?;
        let n = self.n();
        let mut acc = math::NeumaierSum::default();
        for s in 0..self.states() {
            for (k, &c) in self.cond_row(s).iter().enumerate() {
                let t = s ^ (1 << k);
                if t > s {
                    let v = flow.values()[s * n + k];
                    acc.add(v * v / c);
                }
            }
        }
        Ok(acc.value() * self.z_rel)
    }
}
