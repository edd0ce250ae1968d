//! Metastability diagnostics: Dirichlet eigenvalue, singleton capacities,
//! the metastability certificate, metastable partitions and the
//! quenched/annealed sandwich comparisons.

use alloc::string::String;
use alloc::vec::Vec;

use super::solver::{pcg, scaled_residual, dot, CgOptions, Cholesky, Laplacian};
use super::ExactChain;
use crate::error::{config, Error, Result};
use crate::math;
use crate::stateset::{check_disjoint, StateSet};

/// Largest free set handled by the dense singleton scan.
const DENSE_LIMIT: usize = 4200;
/// Largest free set handled by the iterative singleton scan.
const ITERATIVE_LIMIT: usize = 1 << 16;
/// Hitting probabilities closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Candidate metastable sets `M_1, …, M_K` and the pair they select.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaSpec {
    /// Pairwise disjoint sets, ordered by decreasing weight.
    pub sets: Vec<StateSet>,
    /// One-based `i ∈ {2, …, K}`: `A = M_i`, `B = M_1 ∪ … ∪ M_{i-1}`.
    pub index: usize,
    /// Target `ρ` for the certificate.
    pub rho: f64,
    pub k1: f64,
    pub k2: f64,
}

impl MetaSpec {
    /// Sets with `ρ = e^{-k_1 N}`.
    pub fn new(sets: Vec<StateSet>, index: usize, k1: f64, k2: f64) -> Result<Self> {
        let n = sets.first().map(|s| s.n()).ok_or(Error::EmptySet("metastable sets"))?;
        let spec = Self { sets, index, rho: math::exp(-k1 * n as f64), k1, k2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.sets.len();
        if k < 2 {
            return Err(config("at least two metastable sets are needed"));
        }
        if !(2..=k).contains(&self.index) {
            return Err(config(alloc::format!("index {} outside 2..={k}", self.index)));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(config("k_1 and k_2 must be positive"));
        }
        let refs: Vec<&StateSet> = self.sets.iter().collect();
        check_disjoint(self.sets[0].n(), &refs)
    }

    pub fn n(&self) -> usize {
        self.sets[0].n()
    }

    /// `(A, B) = (M_i, ∪_{j<i} M_j)`.
    pub fn target_pair(&self) -> Result<(StateSet, StateSet)> {
        self.validate()?;
        let a = self.sets[self.index - 1].clone();
        let mut b = self.sets[0].clone();
        for s in &self.sets[1..self.index - 1] {
            b = b.union(s)?;
        }
        Ok((a, b))
    }

    /// `M = ∪_j M_j`.
    pub fn union(&self) -> Result<StateSet> {
        let mut u = self.sets[0].clone();
        for s in &self.sets[1..] {
            u = u.union(s)?;
        }
        Ok(u)
    }

    /// Reorders the sets by decreasing weight under `chain`.
    pub fn sort_by_weight(mut self, chain: &ExactChain) -> Result<Self> {
        let mut keyed: Vec<(f64, StateSet)> = self
            .sets
            .into_iter()
            .map(|s| chain.log_z_measure(&s).map(|w| (w, s)))
            .collect::<Result<_>>()?;
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
        self.sets = keyed.into_iter().map(|(_, s)| s).collect();
        Ok(self)
    }

    pub fn is_ordered(&self, chain: &ExactChain) -> Result<bool> {
        let w: Vec<f64> = self.sets.iter().map(|s| chain.log_z_measure(s)).collect::<Result<_>>()?;
        Ok(w.windows(2).all(|p| p[0] >= p[1]))
    }
}

/// Smallest eigenvalue of `-L` with Dirichlet conditions on a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenResult {
    /// Rayleigh quotient of the final iterate.
    pub lambda: f64,
    /// `‖(-L)v - λ v‖_μ / ‖v‖_μ`.
    pub residual: f64,
    pub iterations: usize,
}

impl EigenResult {
    /// `λ - residual`, the lower end of the residual interval.
    pub fn lower(&self) -> f64 {
        (self.lambda - self.residual).max(0.0)
    }
}

/// Singleton capacities `cap({σ}, M)/μ(σ)` over `σ ∉ M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingletonScan {
    pub min_ratio: f64,
    pub argmin: u64,
}

/// Bracket of the ratio in the definition of `ρ`-metastability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `K max_j cap(M_j, M∖M_j)/μ[M_j]`.
    pub numerator: f64,
    pub eigen: EigenResult,
    pub singletons: Option<SingletonScan>,
    /// Numerator over the eigenvalue lower bound (upper bound on the ratio).
    pub ratio_upper: f64,
    /// Numerator over the singleton minimum (lower bound on the ratio).
    pub ratio_lower: Option<f64>,
    pub rho: f64,
    pub certified: bool,
}

/// Assignment of every state to a valley.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub n: usize,
    /// Zero-based valley index per state.
    pub assignment: Vec<u16>,
    pub k: usize,
}

impl Partition {
    /// Valley `S_j` (zero-based `j`) as an explicit set.
    pub fn valley(&self, j: usize) -> Result<StateSet> {
        StateSet::from_indices(
            self.n,
            self.assignment.iter().enumerate().filter(|(_, &v)| v as usize == j).map(|(s, _)| s as u64),
        )
    }
}

/// One comparison of a quenched and an annealed quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichEntry {
    pub quantity: String,
    pub log_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub a_n: f64,
    pub max_dev: f64,
    pub entries: Vec<SandwichEntry>,
}

impl SandwichReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }
}

impl ExactChain {
    fn free_complement(&self, m: &StateSet) -> Result<Vec<bool>> {
        self.check_set(m)?;
        let ind = m.indicator()?;
        if ind.iter().all(|&b| b) {
            return Err(Error::Precondition("the absorbing set is the whole space".into()));
        }
        if ind.iter().all(|&b| !b) {
            return Err(Error::EmptySet("absorbing set"));
        }
        Ok(ind.into_iter().map(|b| !b).collect())
    }

    /// Smallest eigenvalue of `-L` on `S ∖ M` with absorption on `M`.
    ///
    /// Runs Lanczos on `T = K^{-1} W` (self-adjoint in the `W`-inner
    /// product, `W = diag(w)`), whose largest eigenvalue is `1/λ₀`, with full
    /// reorthogonalization and restarts from the current Ritz vector. The
    /// returned residual is recomputed from the Ritz vector directly.
    pub fn dirichlet_eigenvalue(&self, m: &StateSet) -> Result<EigenResult> {
        let free = self.free_complement(m)?;
        let states = self.states();
        let op = Laplacian { n: self.n(), cond: &self.cond, diag: &self.diag, free: &free };
        let w: Vec<f64> = (0..states).map(|s| if free[s] { self.w[s] } else { 0.0 }).collect();
        let w_dot = |a: &[f64], b: &[f64]| -> f64 {
            let wa: Vec<f64> = a.iter().zip(&w).map(|(x, y)| x * y).collect();
            dot(&wa, b)
        };
        let apply_t = |q: &[f64], guess: &mut Vec<f64>| -> Result<()> {
            let rhs: Vec<f64> = q.iter().zip(&w).map(|(a, b)| a * b).collect();
            let rhs_l1: f64 = rhs.iter().map(|r| r.abs()).sum();
            let measure = |x: &[f64], r: &[f64]| -> f64 {
                scaled_residual(&op, x, r).max(r.iter().map(|v| v.abs()).sum::<f64>() / rhs_l1)
            };
            pcg(&op, &rhs, guess, CgOptions { tol: 1e-14, ..CgOptions::default() }, &measure)?;
            Ok(())
        };
        let mut start: Vec<f64> = free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let mut best = EigenResult { lambda: f64::INFINITY, residual: f64::INFINITY, iterations: 0 };
        let mut total_steps = 0;
        let mut kx = alloc::vec![0.0; states];
        for _restart in 0..8 {
            let norm = math::sqrt(w_dot(&start, &start));
            let mut basis: Vec<Vec<f64>> = alloc::vec![start.iter().map(|x| x / norm).collect()];
            let mut alphas: Vec<f64> = Vec::new();
            let mut betas: Vec<f64> = Vec::new();
            let mut guess = basis[0].clone();
            let mut ritz = (0.0, alloc::vec![1.0]);
            let max_steps = 120.min(basis[0].iter().filter(|&&x| x != 0.0).count().max(1));
            for j in 0..max_steps {
                let q = basis[j].clone();
                // warm start from the previous image
                apply_t(&q, &mut guess)?;
                total_steps += 1;
                let mut z = guess.clone();
                let alpha = w_dot(&q, &z);
                alphas.push(alpha);
                for _ in 0..2 {
                    for b in &basis {
                        let c = w_dot(b, &z);
                        for (zi, bi) in z.iter_mut().zip(b) {
                            *zi -= c * bi;
                        }
                    }
                }
                let beta = math::sqrt(w_dot(&z, &z));
                ritz = tridiagonal_top(&alphas, &betas);
                let estimate = beta * ritz.1.last().copied().unwrap_or(1.0).abs();
                if estimate <= 1e-13 * ritz.0 || beta <= 1e-300 || j + 1 == max_steps {
                    break;
                }
                betas.push(beta);
                basis.push(z.iter().map(|x| x / beta).collect());
            }
            let mut v = alloc::vec![0.0; states];
            for (b, &y) in basis.iter().zip(&ritz.1) {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += y * bi;
                }
            }
            op.apply(&v, &mut kx);
            let norm2 = w_dot(&v, &v);
            let lambda = dot(&v, &kx) / norm2;
            let mut res2 = 0.0;
            for s in 0..states {
                if free[s] {
                    let g = kx[s] / self.w[s] - lambda * v[s];
                    res2 += self.w[s] * g * g;
                }
            }
            let residual = math::sqrt(res2 / norm2);
            if residual < best.residual {
                best = EigenResult { lambda, residual, iterations: total_steps };
            }
            if residual <= 1e-10 * lambda {
                break;
            }
            start = v;
        }
        if best.residual <= 1e-8 {
            Ok(best)
        } else {
            Err(Error::NoConvergence { iterations: best.iterations, residual: best.residual })
        }
    }

    /// `min_{σ∉M} cap({σ}, M)/μ(σ)`, using `cap({σ},M)/μ(σ) = 1/(w(σ) G(σ,σ))`
    /// with `G` the inverse of the conductance Laplacian on `S ∖ M`.
    pub fn singleton_scan(&self, m: &StateSet) -> Result<SingletonScan> {
        let free = self.free_complement(m)?;
        let idx: Vec<usize> = (0..self.states()).filter(|&s| free[s]).collect();
        let count = idx.len();
        let green_diag: Vec<f64> = if count <= DENSE_LIMIT {
            let mut pos = alloc::vec![usize::MAX; self.states()];
            for (i, &s) in idx.iter().enumerate() {
                pos[s] = i;
            }
            let inv_sqrt: Vec<f64> = idx.iter().map(|&s| 1.0 / math::sqrt(self.diag[s])).collect();
            let mut a = alloc::vec![0.0; count * count];
            for (i, &s) in idx.iter().enumerate() {
                a[i * count + i] = 1.0;
                for (k, &c) in self.cond_row(s).iter().enumerate() {
                    let j = pos[s ^ (1 << k)];
                    if j != usize::MAX {
                        a[i * count + j] = -c * inv_sqrt[i] * inv_sqrt[j];
                    }
                }
            }
            let ch = Cholesky::factor(count, a)?;
            ch.inverse_diagonal().iter().zip(&inv_sqrt).map(|(g, d)| g * d * d).collect()
        } else if count <= ITERATIVE_LIMIT {
            let op = Laplacian { n: self.n(), cond: &self.cond, diag: &self.diag, free: &free };
            let solve = |s: usize| -> Result<f64> {
                let mut rhs = alloc::vec![0.0; self.states()];
                rhs[s] = 1.0;
                let mut x = alloc::vec![0.0; self.states()];
                let measure = |x: &[f64], r: &[f64]| scaled_residual(&op, x, r);
                pcg(&op, &rhs, &mut x, CgOptions { tol: 1e-12, loose_tol: 1e-8, ..CgOptions::default() }, &measure)?;
                Ok(x[s])
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                idx.par_iter().map(|&s| solve(s)).collect::<Result<Vec<f64>>>()?
            }
            #[cfg(not(feature = "parallel"))]
            {
                idx.iter().map(|&s| solve(s)).collect::<Result<Vec<f64>>>()?
            }
        } else {
            return Err(Error::Capability { n: self.n(), limit: 16 });
        };
        let mut best = SingletonScan { min_ratio: f64::INFINITY, argmin: 0 };
        for (&s, &g) in idx.iter().zip(&green_diag) {
            let ratio = 1.0 / (self.w[s] * g);
            if ratio < best.min_ratio {
                best = SingletonScan { min_ratio: ratio, argmin: s as u64 };
            }
        }
        Ok(best)
    }

    /// `K max_j cap(M_j, M∖M_j)/μ[M_j]`.
    pub fn metastability_numerator(&self, ms: &MetaSpec) -> Result<f64> {
        ms.validate()?;
        let k = ms.sets.len();
        let mut worst: f64 = 0.0;
        for j in 0..k {
            let rest = rest_of(ms, j)?;
            let sol = self.solve(&ms.sets[j], &rest)?;
            let ratio = math::exp(sol.log_z_cap - self.log_z_measure(&ms.sets[j])?);
            worst = worst.max(ratio);
        }
        Ok(k as f64 * worst)
    }

    /// Brackets the metastability ratio: the minimum over all `X ⊆ S∖M` of
    /// `cap(X,M)/μ[X]` lies between the Dirichlet eigenvalue and the best
    /// singleton. `with_singletons = false` skips the singleton scan.
    pub fn metastability_certificate(&self, ms: &MetaSpec, with_singletons: bool) -> Result<Certificate> {
        let numerator = self.metastability_numerator(ms)?;
        let m = ms.union()?;
        let eigen = self.dirichlet_eigenvalue(&m)?;
        let singletons = if with_singletons { Some(self.singleton_scan(&m)?) } else { None };
        let ratio_upper = numerator / eigen.lower();
        let ratio_lower = singletons.map(|s| numerator / s.min_ratio);
        Ok(Certificate {
            numerator,
            eigen,
            singletons,
            ratio_upper,
            ratio_lower,
            rho: ms.rho,
            certified: ratio_upper <= ms.rho,
        })
    }

    /// Assigns each state outside `M` to the set it most likely reaches
    /// first; ties (within [`TIE_TOLERANCE`]) go to the lowest index.
    pub fn metastable_partition(&self, ms: &MetaSpec) -> Result<Partition> {
        ms.validate()?;
        let k = ms.sets.len();
        let mut hs = Vec::with_capacity(k);
        for j in 0..k {
            hs.push(self.equilibrium_potential(&ms.sets[j], &rest_of(ms, j)?)?);
        }
        let members: Vec<Vec<bool>> = ms.sets.iter().map(|s| s.indicator()).collect::<Result<_>>()?;
        let assignment = (0..self.states())
            .map(|s| {
                if let Some(j) = members.iter().position(|m| m[s]) {
                    return j as u16;
                }
                let mut best = 0;
                for j in 1..k {
                    if hs[j][s] > hs[best][s] + TIE_TOLERANCE {
                        best = j;
                    }
                }
                best as u16
            })
            .collect();
        Ok(Partition { n: self.n(), assignment, k })
    }
}

fn rest_of(ms: &MetaSpec, j: usize) -> Result<StateSet> {
    let mut others = ms.sets.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, s)| s);
    let mut rest = others.next().expect("K >= 2").clone();
    for s in others {
        rest = rest.union(s)?;
    }
    Ok(rest)
}

/// Compares a quenched chain with its annealed counterpart on the event
/// `max |H - H̃| < a_N`: `Z cap` and `Z μ[X]` ratios must lie within
/// `e^{±β a_N}` and escape ratios `cap/μ[A]` within `e^{±2β a_N}`.
pub fn sandwich_check(
    quenched: &ExactChain,
    annealed: &ExactChain,
    a_n: f64,
    pairs: &[(StateSet, StateSet)],
    sets: &[StateSet],
) -> Result<SandwichReport> {
    let (eq, ea) = (quenched.landscape().energies(), annealed.landscape().energies());
    if eq.len() != ea.len() {
        return Err(Error::Dimension { expected: eq.len(), found: ea.len() });
    }
    let beta = quenched.landscape().beta();
    let max_dev = eq.iter().zip(ea).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !(max_dev < a_n) {
        return Err(Error::Precondition(alloc::format!(
            "max |H - H̃| = {max_dev} is not below a_N = {a_n}"
        )));
    }
    let slack = 1e-10;
    let mut entries = Vec::new();
    let mut push = |quantity: String, log_ratio: f64, bound: f64| {
        entries.push(SandwichEntry { quantity, log_ratio, bound, holds: log_ratio.abs() <= bound + slack });
    };
    for (i, (a, b)) in pairs.iter().enumerate() {
        let (sq, sa) = (quenched.solve(a, b)?, annealed.solve(a, b)?);
        push(alloc::format!("Z·cap pair {i}"), sq.log_z_cap - sa.log_z_cap, beta * a_n);
        let esc_q = sq.log_z_cap - quenched.log_z_measure(a)?;
        let esc_a = sa.log_z_cap - annealed.log_z_measure(a)?;
        push(alloc::format!("cap/μ[A] pair {i}"), esc_q - esc_a, 2.0 * beta * a_n);
    }
    for (i, x) in sets.iter().enumerate() {
        let r = quenched.log_z_measure(x)? - annealed.log_z_measure(x)?;
        push(alloc::format!("Z·μ[X] set {i}"), r, beta * a_n);
    }
    Ok(SandwichReport { a_n, max_dev, entries })
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `a` and off-diagonal `b`, with a unit eigenvector.
fn tridiagonal_top(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let m = a.len();
    if m == 1 {
        return (a[0], alloc::vec![1.0]);
    }
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < m { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    // Sturm count: number of eigenvalues below x
    let below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..m {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { off / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) >= m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = hi;
    // inverse iteration with a slightly perturbed shift
    let shift = theta * (1.0 + 1e-14) + 1e-300;
    let mut y = alloc::vec![1.0; m];
    for _ in 0..3 {
        y = solve_shifted(a, b, shift, &y);
        let norm = math::sqrt(y.iter().map(|v| v * v).sum());
        for v in y.iter_mut() {
            *v /= norm;
        }
    }
    (theta, y)
}

/// Solves `(T - σ I) x = r` for tridiagonal `T` by Gaussian elimination with
/// partial pivoting.
fn solve_shifted(a: &[f64], b: &[f64], sigma: f64, r: &[f64]) -> Vec<f64> {
    let m = a.len();
    // rows hold up to three non-zeros after pivoting: columns i, i+1, i+2
    let mut d: Vec<f64> = a.iter().map(|x| x - sigma).collect();
    let mut u1: Vec<f64> = (0..m).map(|i| if i + 1 < m { b[i] } else { 0.0 }).collect();
    let mut u2 = alloc::vec![0.0; m];
    let mut l: Vec<f64> = (0..m).map(|i| if i + 1 < m { b[i] } else { 0.0 }).collect();
    let mut rhs = r.to_vec();
    for i in 0..m.saturating_sub(1) {
        // candidate pivot rows i (d[i], u1[i], u2[i]) and i+1 (l[i], d[i+1], u1[i+1])
        if l[i].abs() > d[i].abs() {
            let (ri0, ri1, ri2) = (d[i], u1[i], u2[i]);
            d[i] = l[i];
            u1[i] = d[i + 1];
            u2[i] = u1[i + 1];
            l[i] = ri0;
            d[i + 1] = ri1;
            u1[i + 1] = ri2;
            rhs.swap(i, i + 1);
        }
        if d[i] == 0.0 {
            d[i] = 1e-300;
        }
        let f = l[i] / d[i];
        d[i + 1] -= f * u1[i];
        u1[i + 1] -= f * u2[i];
        rhs[i + 1] -= f * rhs[i];
    }
    if d[m - 1] == 0.0 {
        d[m - 1] = 1e-300;
    }
    let mut x = alloc::vec![0.0; m];
    for i in (0..m).rev() {
        let mut v = rhs[i];
        if i + 1 < m {
            v -= u1[i] * x[i + 1];
        }
        if i + 2 < m {
            v -= u2[i] * x[i + 2];
        }
        x[i] = v / d[i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_top_eigenpair() {
        // path Laplacian-like matrix: eigenvalues 2 - 2cos(kπ/(m+1))
        let m = 12;
        let a = alloc::vec![2.0; m];
        let b = alloc::vec![-1.0; m - 1];
        let (theta, y) = tridiagonal_top(&a, &b);
        let expect = 2.0 - 2.0 * libm::cos(m as f64 * core::f64::consts::PI / (m as f64 + 1.0));
        assert!((theta - expect).abs() < 1e-13);
        for i in 0..m {
            let mut ty = a[i] * y[i];
            if i > 0 {
                ty += b[i - 1] * y[i - 1];
            }
            if i + 1 < m {
                ty += b[i] * y[i + 1];
            }
            assert!((ty - theta * y[i]).abs() < 1e-10);
        }
    }
}
