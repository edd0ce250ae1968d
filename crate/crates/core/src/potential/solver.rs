//! Linear algebra on the hypercube: the weighted graph Laplacian restricted
//! to a set of free states, a Jacobi-preconditioned conjugate gradient
//! solver, and a dense Cholesky factorization for small systems.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::NeumaierSum;

/// Block length of the fixed reduction scheme; keeps dot products
/// independent of the number of threads.
const BLOCK: usize = 4096;

/// `K x (σ) = Σ_k c(σ,σ^k) (x(σ) - 1{σ^k free} x(σ^k))` for free `σ`,
/// with vectors stored over all `2^N` states (zero off the free set).
pub(crate) struct Laplacian<'a> {
    pub n: usize,
    /// `c[σ N + k]`, symmetric under `(σ, k) ↔ (σ^k, k)`.
    pub cond: &'a [f64],
    /// Sum of conductances at each state.
    pub diag: &'a [f64],
    pub free: &'a [bool],
}

impl Laplacian<'_> {
    pub fn len(&self) -> usize {
        self.free.len()
    }

    fn apply_row(&self, s: usize, x: &[f64]) -> f64 {
        if !self.free[s] {
            return 0.0;
        }
        let row = &self.cond[s * self.n..(s + 1) * self.n];
        let mut off = 0.0;
        for (k, &c) in row.iter().enumerate() {
            let t = s ^ (1 << k);
            if self.free[t] {
                off += c * x[t];
            }
        }
        self.diag[s] * x[s] - off
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.par_chunks_mut(BLOCK).enumerate().for_each(|(bi, chunk)| {
                for (o, y) in chunk.iter_mut().enumerate() {
                    *y = self.apply_row(bi * BLOCK + o, x);
                }
            });
        }
        #[cfg(not(feature = "parallel"))]
        for (s, y) in out.iter_mut().enumerate() {
            *y = self.apply_row(s, x);
        }
    }

    /// `b - K x` with compensated row sums.
    pub fn residual(&self, b: &[f64], x: &[f64], out: &mut [f64]) {
        let row = |s: usize| -> f64 {
            if !self.free[s] {
                return 0.0;
            }
            let mut acc = NeumaierSum::default();
            acc.add(b[s]);
            acc.add(-self.diag[s] * x[s]);
            for (k, &c) in self.cond[s * self.n..(s + 1) * self.n].iter().enumerate() {
                let t = s ^ (1 << k);
                if self.free[t] {
                    acc.add(c * x[t]);
                }
            }
            acc.value()
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.par_chunks_mut(BLOCK).enumerate().for_each(|(bi, chunk)| {
                for (o, y) in chunk.iter_mut().enumerate() {
                    *y = row(bi * BLOCK + o);
                }
            });
        }
        #[cfg(not(feature = "parallel"))]
        for (s, y) in out.iter_mut().enumerate() {
            *y = row(s);
        }
    }
}

/// Dot product with a fixed blocking order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let block = |i: usize| -> f64 {
        let lo = i * BLOCK;
        let hi = (lo + BLOCK).min(a.len());
        a[lo..hi].iter().zip(&b[lo..hi]).map(|(x, y)| x * y).sum()
    };
    let blocks = a.len().div_ceil(BLOCK);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if blocks > 1 {
            let parts: Vec<f64> = (0..blocks).into_par_iter().map(block).collect();
            return parts.iter().sum();
        }
    }
    (0..blocks).map(block).sum()
}

/// Settings of one conjugate gradient solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CgOptions {
    /// Stop once the error measure drops below this.
    pub tol: f64,
    /// Accept a stagnated solve whose error measure is below this.
    pub loose_tol: f64,
    pub max_iter: usize,
    /// Iterations between true-residual recomputations.
    pub check_every: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-13, loose_tol: 1e-9, max_iter: 0, check_every: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final value of the problem's error measure.
    pub error: f64,
}

/// Solves `K x = b` on the free states starting from `x`. `measure(x, r)`
/// turns the current iterate and its true residual into a dimensionless
/// error.
pub(crate) fn pcg(
    op: &Laplacian<'_>,
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
    measure: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<SolveStats> {
    let len = op.len();
    let free_count = op.free.iter().filter(|&&f| f).count();
    let max_iter = if opts.max_iter == 0 { 20 * free_count + 1000 } else { opts.max_iter };
    let inv_diag: Vec<f64> =
        op.diag.iter().zip(op.free).map(|(&d, &f)| if f && d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let mut r = alloc::vec![0.0; len];
    op.residual(b, x, &mut r);
    let mut err = measure(x, &r);
    if err <= opts.tol || free_count == 0 {
        return Ok(SolveStats { iterations: 0, error: err });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut q = alloc::vec![0.0; len];
    let mut rz = dot(&r, &z);
    let mut best = err;
    let mut checks_since_best = 0usize;
    let mut it = 0;
    while it < max_iter {
        op.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rz / pq;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        it += 1;
        if it % opts.check_every == 0 {
            op.residual(b, x, &mut r);
            err = measure(x, &r);
            if err <= opts.tol {
                return Ok(SolveStats { iterations: it, error: err });
            }
            if err < 0.5 * best {
                best = err;
                checks_since_best = 0;
            } else {
                checks_since_best += 1;
                // stagnation at the rounding floor
                if checks_since_best >= 30 {
                    break;
                }
            }
            // restart from the true residual
            for i in 0..len {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
            continue;
        }
        for i in 0..len {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
    }
    op.residual(b, x, &mut r);
    err = measure(x, &r);
    if err <= opts.loose_tol {
        Ok(SolveStats { iterations: it, error: err })
    } else {
        Err(Error::NoConvergence { iterations: it, residual: err })
    }
}

/// `max_σ |r(σ)| / d(σ)` over free states, relative to `max |x|`.
pub(crate) fn scaled_residual(op: &Laplacian<'_>, x: &[f64], r: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for s in 0..op.len() {
        if op.free[s] {
            worst = worst.max((r[s] / op.diag[s]).abs());
            scale = scale.max(x[s].abs());
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Dense symmetric positive definite factorization `A = L Lᵀ` (lower
/// triangle stored row by row).
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major matrix `a`.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        for j in 0..n {
            let s: f64 = a[j * n..j * n + j].iter().map(|v| v * v).sum();
            let d = a[j * n + j] - s;
            if !(d > 0.0) {
                return Err(Error::Precondition("matrix is not positive definite".into()));
            }
            a[j * n + j] = libm::sqrt(d);
            let ljj = a[j * n + j];
            for i in j + 1..n {
                let (upper, lower) = a.split_at_mut(i * n);
                let rj = &upper[j * n..j * n + j];
                let ri = &mut lower[..n];
                let s: f64 = ri[..j].iter().zip(rj).map(|(x, y)| x * y).sum();
                ri[j] = (ri[j] - s) / ljj;
            }
        }
        Ok(Self { n, l: a })
    }

    /// Diagonal of `A^{-1}`: `(A^{-1})_ii = ‖L^{-1} e_i‖²`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let one = |i: usize| -> f64 {
            // forward substitution for L y = e_i; y vanishes above i
            let mut y = alloc::vec![0.0; n - i];
            y[0] = 1.0 / self.l[i * n + i];
            for r in i + 1..n {
                let row = &self.l[r * n + i..r * n + r];
                let s: f64 = row.iter().zip(&y[..r - i]).map(|(a, b)| a * b).sum();
                y[r - i] = -s / self.l[r * n + r];
            }
            y.iter().map(|v| v * v).sum()
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n).map(one).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_inverse_diagonal() {
        // A = [[4,2,0],[2,5,1],[0,1,3]]
        let a = alloc::vec![4.0, 2.0, 0.0, 2.0, 5.0, 1.0, 0.0, 1.0, 3.0];
        let ch = Cholesky::factor(3, a).unwrap();
        let d = ch.inverse_diagonal();
        // det = 4*(15-1) - 2*(6-0) = 44; cofactors: 14, 12, 16
        let expect = [14.0 / 44.0, 12.0 / 44.0, 16.0 / 44.0];
        for (x, y) in d.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(Cholesky::factor(2, alloc::vec![1.0, 2.0, 2.0, 1.0]).is_err());
    }
}
