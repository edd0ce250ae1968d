//! Small numerical helpers shared across modules.
//!
//! All transcendental functions go through `libm` so results do not depend
//! on the platform C library.

pub use libm::{exp, expm1, fabs, lgamma, log, log1p, sqrt, tanh, atanh};

/// `log(sum(exp(x)))` without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = NeumaierSum::default();
    for &v in values {
        acc.add(exp(v - max));
    }
    max + log(acc.value())
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + log1p(exp(lo - hi))
}

/// Compensated (Kahan–Babuška–Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if fabs(self.sum) >= fabs(x) {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl core::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// `log C(n, k)` via log-gamma.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    let (n, k) = (n as f64, k as f64);
    lgamma(n + 1.0) - lgamma(k + 1.0) - lgamma(n - k + 1.0)
}

/// `x log x` extended by continuity to `x = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * log(x)
    }
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = fabs(a).max(fabs(b));
    if scale == 0.0 {
        0.0
    } else {
        fabs(a - b) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_naive() {
        let v = [0.1, -2.0, 3.5];
        let naive = log(exp(0.1) + exp(-2.0) + exp(3.5));
        assert!(fabs(log_sum_exp(&v) - naive) < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        // would overflow naively
        assert!(fabs(log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + log(2.0))) < 1e-12);
    }

    #[test]
    fn log_binomial_small() {
        assert!(fabs(log_binomial(10, 3) - log(120.0)) < 1e-12);
        assert_eq!(log_binomial(5, 0), 0.0);
    }

    #[test]
    fn compensated_sum() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(xs), 2.0);
    }
}
