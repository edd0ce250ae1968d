//! Random coupling arrays.
//!
//! Couplings are `J_ij = A_ij · 1{U_ij <= P_ij}` for `i < j`, with `U_ij`
//! uniform and independent given the environment `(A_ij, P_ij)`. The three
//! supported families differ only in how the environment is produced:
//!
//! * Erdős–Rényi: `A_ij = 1`, `P_ij = p`;
//! * inhomogeneous (Chung–Lu): `A_ij = 1`, `P_ij = V_i V_j` with vertex
//!   weights `V_i` drawn from a law on `(0, 1]`;
//! * diluted Hopfield: `A_ij = Σ_k ξ_i^k ξ_j^k`, `P_ij = p`.
//!
//! See [`crate::rng`] for the stream layout that makes a sample a pure
//! function of `(spec, N, seed)`.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::{config, Error, Result};
use crate::math;
use crate::rng::{self, Domain};

/// Law of the vertex weights of the inhomogeneous family.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "law", rename_all = "snake_case"))]
pub enum VertexLaw {
    /// Uniform on `[lo, hi]`, `0 < lo <= hi <= 1`.
    Uniform { lo: f64, hi: f64 },
    /// Finitely supported law: `values[i]` with probability proportional to `weights[i]`.
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

/// Whether a random environment is redrawn for every replica or drawn once
/// (from replica 0's stream) and shared by all replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Environment {
    #[default]
    PerReplica,
    Shared,
}

/// Hopfield patterns `ξ^1, …, ξ^n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "source", rename_all = "snake_case"))]
pub enum Patterns {
    /// Given patterns, each of length `N`, entries in `[-1, 1]`.
    Explicit { patterns: Vec<Vec<f64>> },
    /// `count` patterns with independent uniform `±1` entries.
    Rademacher {
        count: usize,
        #[cfg_attr(feature = "serde", serde(default))]
        environment: Environment,
    },
}

impl Patterns {
    fn count(&self) -> usize {
        match self {
            Patterns::Explicit { patterns } => patterns.len(),
            Patterns::Rademacher { count, .. } => *count,
        }
    }

    fn max_abs_entry(&self) -> f64 {
        match self {
            Patterns::Explicit { patterns } => patterns
                .iter()
                .flat_map(|p| p.iter())
                .fold(0.0, |m, x| m.max(math::fabs(*x))),
            Patterns::Rademacher { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DisorderKind {
    ErdosRenyi {
        p: f64,
    },
    Inhomogeneous {
        weights: VertexLaw,
        #[cfg_attr(feature = "serde", serde(default))]
        environment: Environment,
    },
    DilutedHopfield {
        patterns: Patterns,
        p: f64,
    },
}

/// A coupling family together with the uniform bound `k_J`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisorderSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: DisorderKind,
    pub k_j: f64,
}

/// Seed of one disorder replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomSeed {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl RandomSeed {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        Self { master_seed, replica_index }
    }

    fn stream(&self, domain: Domain, environment: Environment) -> ChaCha8Rng {
        let replica = match environment {
            Environment::PerReplica => self.replica_index,
            Environment::Shared => 0,
        };
        rng::stream(self.master_seed, replica, domain)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(config(alloc::format!("{name} = {p} must lie in (0, 1]")))
    }
}

impl DisorderSpec {
    pub fn erdos_renyi(p: f64, k_j: f64) -> Self {
        Self { kind: DisorderKind::ErdosRenyi { p }, k_j }
    }

    /// Checks the parameter invariants that do not depend on `N`.
    pub fn validate(&self) -> Result<()> {
        if !(self.k_j > 0.0 && self.k_j.is_finite()) {
            return Err(config("k_J must be positive and finite"));
        }
        match &self.kind {
            DisorderKind::ErdosRenyi { p } => {
                check_probability("p", *p)?;
                if self.k_j < 1.0 {
                    return Err(config("Erdős–Rényi couplings equal 1, so k_J >= 1 is required"));
                }
            }
            DisorderKind::Inhomogeneous { weights, .. } => {
                if self.k_j < 1.0 {
                    return Err(config("inhomogeneous couplings equal 1, so k_J >= 1 is required"));
                }
                match weights {
                    VertexLaw::Uniform { lo, hi } => {
                        check_probability("lo", *lo)?;
                        check_probability("hi", *hi)?;
                        if lo > hi {
                            return Err(config("uniform vertex law needs lo <= hi"));
                        }
                    }
                    VertexLaw::Discrete { values, weights } => {
                        if values.is_empty() || values.len() != weights.len() {
                            return Err(config("discrete vertex law needs matching non-empty values and weights"));
                        }
                        for v in values {
                            check_probability("vertex weight", *v)?;
                        }
                        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
                            || weights.iter().sum::<f64>() <= 0.0
                        {
                            return Err(config("discrete vertex law weights must be non-negative with positive sum"));
                        }
                    }
                }
            }
            DisorderKind::DilutedHopfield { patterns, p } => {
                check_probability("p", *p)?;
                let n = patterns.count();
                if n == 0 {
                    return Err(config("Hopfield model needs at least one pattern"));
                }
                let xi = patterns.max_abs_entry();
                if xi > 1.0 {
                    return Err(config("pattern entries must lie in [-1, 1]"));
                }
                if self.k_j < n as f64 * xi * xi {
                    return Err(config(alloc::format!(
                        "k_J = {} is below n·max|ξ|² = {}",
                        self.k_j,
                        n as f64 * xi * xi
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether the annealed couplings are the same for every replica.
    pub fn has_fixed_environment(&self) -> bool {
        match &self.kind {
            DisorderKind::ErdosRenyi { .. } => true,
            DisorderKind::Inhomogeneous { environment, .. } => *environment == Environment::Shared,
            DisorderKind::DilutedHopfield { patterns, .. } => match patterns {
                Patterns::Explicit { .. } => true,
                Patterns::Rademacher { environment, .. } => *environment == Environment::Shared,
            },
        }
    }

    /// Mean coupling `p̄` when the environment has constant mean, i.e. for
    /// the Erdős–Rényi family.
    pub fn constant_mean(&self) -> Option<f64> {
        match &self.kind {
            DisorderKind::ErdosRenyi { p } => Some(*p),
            _ => None,
        }
    }
}

/// Index of the edge `(i, j)`, `i < j`, in the row-major upper triangle.
#[inline]
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Number of edges `N(N-1)/2`.
#[inline]
pub fn edge_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Iterator over `(i, j)` in row-major upper-triangle order.
pub fn edges(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Coupling realization with per-edge conditional moments.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    k_j: f64,
    j: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// Two-point edge law: value `a` with probability `p`, else 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointLaw {
    pub a: f64,
    pub p: f64,
}

impl TwoPointLaw {
    pub fn mean(&self) -> f64 {
        self.a * self.p
    }

    pub fn variance(&self) -> f64 {
        self.a * self.a * self.p * (1.0 - self.p)
    }

    /// `E[e^{t (J - E J)}]`.
    pub fn centered_mgf(&self, t: f64) -> f64 {
        if self.p >= 1.0 || self.a == 0.0 {
            return 1.0;
        }
        let m = self.mean();
        (1.0 - self.p) * math::exp(-t * m) + self.p * math::exp(t * (self.a - m))
    }
}

impl CouplingMatrix {
    /// Assembles a matrix from upper-triangle arrays and checks the
    /// invariants `|J|, |mean| <= k_J`, `var >= 0`.
    pub fn from_parts(n: usize, k_j: f64, j: Vec<f64>, mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(config("N must be at least 2"));
        }
        if n > crate::spin::MAX_SPINS {
            return Err(config("N must be at most 64"));
        }
        if !(k_j > 0.0 && k_j.is_finite()) {
            return Err(config("k_J must be positive and finite"));
        }
        let m = edge_count(n);
        for v in [&j, &mean, &var] {
            if v.len() != m {
                return Err(Error::Dimension { expected: m, found: v.len() });
            }
        }
        // allow one ulp of slack for moments computed from products
        let bound = k_j * (1.0 + 4.0 * f64::EPSILON);
        for e in 0..m {
            if !(math::fabs(j[e]) <= k_j) {
                return Err(config(alloc::format!("|J| = {} exceeds k_J at edge {e}", j[e])));
            }
            if !(math::fabs(mean[e]) <= bound) || !(var[e] >= 0.0) || !var[e].is_finite() {
                return Err(config(alloc::format!("invalid moments at edge {e}")));
            }
        }
        Ok(Self { n, k_j, j, mean, var })
    }

    /// Deterministic matrix with every coupling equal to `value`.
    pub fn constant(n: usize, value: f64, k_j: f64) -> Result<Self> {
        let m = edge_count(n);
        Self::from_parts(n, k_j, alloc::vec![value; m], alloc::vec![value; m], alloc::vec![0.0; m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_j(&self) -> f64 {
        self.k_j
    }

    /// Realized couplings in row-major upper-triangle order.
    pub fn couplings(&self) -> &[f64] {
        &self.j
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    /// `J_ij`, symmetric in its arguments, zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Less => self.j[edge_index(self.n, i, j)],
            core::cmp::Ordering::Greater => self.j[edge_index(self.n, j, i)],
            core::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Full symmetric `N × N` coupling matrix, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = alloc::vec![0.0; n * n];
        for ((i, j), &v) in edges(n).zip(&self.j) {
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
        out
    }

    /// Whether the matrix carries no randomness (all variances vanish and
    /// couplings equal their means).
    pub fn is_annealed(&self) -> bool {
        self.var.iter().all(|&v| v == 0.0) && self.j == self.mean
    }

    /// Recovers the two-point law of edge `(i, j)` from its moments.
    pub fn edge_law(&self, i: usize, j: usize) -> Result<TwoPointLaw> {
        let e = edge_index(self.n, i.min(j), i.max(j));
        let (m, v) = (self.mean[e], self.var[e]);
        if v == 0.0 {
            return Ok(TwoPointLaw { a: m, p: 1.0 });
        }
        if m == 0.0 {
            return Err(Error::UnsupportedEdgeLaw { i, j });
        }
        let a = m + v / m;
        Ok(TwoPointLaw { a, p: m / a })
    }
}

/// Draws one coupling realization of size `n`.
pub fn sample_couplings(spec: &DisorderSpec, n: usize, seed: RandomSeed) -> Result<CouplingMatrix> {
    spec.validate()?;
    if n < 2 {
        return Err(config("N must be at least 2"));
    }
    if n > crate::spin::MAX_SPINS {
        return Err(config("N must be at most 64"));
    }
    let m = edge_count(n);
    let mut amp = alloc::vec![1.0; m];
    let mut prob = alloc::vec![0.0; m];
    match &spec.kind {
        DisorderKind::ErdosRenyi { p } => prob.iter_mut().for_each(|x| *x = *p),
        DisorderKind::Inhomogeneous { weights, environment } => {
            let mut r = seed.stream(Domain::VertexWeights, *environment);
            let v: Vec<f64> = (0..n).map(|_| draw_vertex_weight(weights, &mut r)).collect();
            for ((i, j), x) in edges(n).zip(prob.iter_mut()) {
                *x = v[i] * v[j];
            }
        }
        DisorderKind::DilutedHopfield { patterns, p } => {
            let xi: Vec<Vec<f64>> = match patterns {
                Patterns::Explicit { patterns } => {
                    if let Some(bad) = patterns.iter().find(|x| x.len() != n) {
                        return Err(Error::Dimension { expected: n, found: bad.len() });
                    }
                    patterns.clone()
                }
                Patterns::Rademacher { count, environment } => {
                    let mut r = seed.stream(Domain::Patterns, *environment);
                    (0..*count)
                        .map(|_| {
                            (0..n)
                                .map(|_| if rand_core::RngCore::next_u64(&mut r) >> 63 == 1 { 1.0 } else { -1.0 })
                                .collect()
                        })
                        .collect()
                }
            };
            for ((i, j), a) in edges(n).zip(amp.iter_mut()) {
                *a = xi.iter().map(|x| x[i] * x[j]).sum();
            }
            prob.iter_mut().for_each(|x| *x = *p);
        }
    }
    let mut r = rng::stream(seed.master_seed, seed.replica_index, Domain::Edges);
    let mut j = Vec::with_capacity(m);
    let mut mean = Vec::with_capacity(m);
    let mut var = Vec::with_capacity(m);
    for e in 0..m {
        // word position 2e is the next word, so sequential reads suffice
        let u = rng::unit_f64(&mut r);
        let (a, p) = (amp[e], prob[e]);
        j.push(if u <= p { a } else { 0.0 });
        mean.push(a * p);
        var.push(a * a * p * (1.0 - p));
    }
    CouplingMatrix::from_parts(n, spec.k_j, j, mean, var)
}

fn draw_vertex_weight(law: &VertexLaw, r: &mut ChaCha8Rng) -> f64 {
    match law {
        VertexLaw::Uniform { lo, hi } => {
            // stays within [lo, hi] since u < 1
            lo + (hi - lo) * rng::unit_f64(r)
        }
        VertexLaw::Discrete { values, weights } => {
            let total: f64 = weights.iter().sum();
            let mut u = rng::unit_f64(r) * total;
            for (v, w) in values.iter().zip(weights) {
                if u < *w {
                    return *v;
                }
                u -= w;
            }
            // rounding left u at the top edge: take the last value of positive weight
            values[weights.iter().rposition(|w| *w > 0.0).unwrap_or(values.len() - 1)]
        }
    }
}

/// `α_N = β²/(2N²) Σ_{i<j} Var[J_ij]`.
pub fn alpha_n(cm: &CouplingMatrix, beta: f64) -> f64 {
    let n = cm.n as f64;
    beta * beta / (2.0 * n * n) * math::sum(cm.var.iter().copied())
}

/// The annealed matrix: couplings replaced by their conditional means.
pub fn annealed_couplings(cm: &CouplingMatrix) -> CouplingMatrix {
    CouplingMatrix {
        n: cm.n,
        k_j: cm.k_j,
        j: cm.mean.clone(),
        mean: cm.mean.clone(),
        var: alloc::vec![0.0; cm.var.len()],
    }
}
