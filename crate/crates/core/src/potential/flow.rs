//! Unit flows between two sets of configurations.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng;
use crate::stateset::StateSet;

/// Tolerance on node balance and total flux.
const FLOW_TOL: f64 = 1e-10;

/// An edge function on the hypercube, `values[σ N + k] = φ(σ, σ^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    n: usize,
    values: Vec<f64>,
}

impl Flow {
    pub fn from_values(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n << n);
        Self { n, values }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, values: alloc::vec![0.0; n << n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Net flow out of `σ`.
    pub fn divergence(&self, s: usize) -> f64 {
        self.values[s * self.n..(s + 1) * self.n].iter().sum()
    }

    /// Adds one unit along a path given as a list of states.
    fn add_path(&mut self, path: &[usize], amount: f64) {
        for w in path.windows(2) {
            let (s, t) = (w[0], w[1]);
            let k = (s ^ t).trailing_zeros() as usize;
            self.values[s * self.n + k] += amount;
            self.values[t * self.n + k] -= amount;
        }
    }

    /// `(1 - θ) self + θ other`.
    pub fn mix(&self, other: &Flow, theta: f64) -> Flow {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        Flow { n: self.n, values }
    }

    /// Checks antisymmetry, conservation off `A ∪ B` and unit flux out of `A`.
    pub fn validate(&self, a: &StateSet, b: &StateSet) -> Result<()> {
        if a.n() != self.n || b.n() != self.n {
            return Err(Error::Dimension { expected: self.n, found: a.n() });
        }
        let (ia, ib) = (a.indicator()?, b.indicator()?);
        let n = self.n;
        let mut out_of_a = 0.0;
        for s in 0..1usize << n {
            for k in 0..n {
                let t = s ^ (1 << k);
                if self.values[s * n + k] != -self.values[t * n + k] {
                    return Err(Error::InvalidFlow(alloc::format!("not antisymmetric on edge ({s}, {t})")));
                }
            }
            let div = self.divergence(s);
            if ia[s] {
                out_of_a += div;
            } else if !ib[s] && div.abs() > FLOW_TOL {
                return Err(Error::InvalidFlow(alloc::format!("divergence {div:e} at interior state {s}")));
            }
        }
        if (out_of_a - 1.0).abs() > FLOW_TOL {
            return Err(Error::InvalidFlow(alloc::format!("flux out of A is {out_of_a}")));
        }
        Ok(())
    }

    /// Average of `paths` unit flows, each along a shortest hypercube path
    /// from a uniform state of `A` to a uniform state of `B` with the
    /// differing spins flipped in uniformly random order.
    pub fn random_unit<R: RngCore + ?Sized>(a: &StateSet, b: &StateSet, paths: usize, rng: &mut R) -> Result<Flow> {
        let n = a.n();
        let (la, lb) = (a.indices()?, b.indices()?);
        if la.is_empty() || lb.is_empty() {
            return Err(Error::EmptySet("flow endpoints"));
        }
        let paths = paths.max(1);
        let mut flow = Flow::zero(n);
        let mut path = Vec::with_capacity(n + 1);
        for _ in 0..paths {
            let start = la[rng::below(rng, la.len() as u64) as usize] as usize;
            let end = lb[rng::below(rng, lb.len() as u64) as usize] as usize;
            let mut sites: Vec<usize> = (0..n).filter(|k| (start ^ end) >> k & 1 == 1).collect();
            for i in (1..sites.len()).rev() {
                let j = rng::below(rng, i as u64 + 1) as usize;
                sites.swap(i, j);
            }
            path.clear();
            path.push(start);
            let mut cur = start;
            for k in sites {
                cur ^= 1 << k;
                path.push(cur);
            }
            flow.add_path(&path, 1.0 / paths as f64);
        }
        Ok(flow)
    }
}
