//! Aggregation of replica results into tail and moment reports, with CSV
//! output.
//!
//! Every empirical frequency carries its binomial standard error
//! `sqrt(f(1-f)/R)`. An envelope that is at least 1 (or a confidence level
//! that is at most 0) is marked vacuous and never counts as a pass.

use std::fmt::Write as _;

use metastab_core::disorder::{sample_couplings, DisorderSpec, RandomSeed};
use metastab_core::model::{conditional_log_mgf, mgf_remainder_bound, ModelParams, Sign};
use metastab_core::rng::{self, Domain};
use metastab_core::SpinConfig;
use rand_core::RngCore;
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::experiments::ReplicaResult;

/// Fewest replicas accepted by the concentration reports.
pub const MIN_TAIL_REPLICAS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Direction {
    /// Pass when `empirical <= bound + allowance`.
    AtMost,
    /// Pass when `empirical >= bound`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    /// Whether the inequality holds, vacuous or not.
    pub holds: bool,
    pub vacuous: bool,
}

impl TailRow {
    pub fn pass(&self) -> Option<bool> {
        if self.vacuous {
            None
        } else {
            Some(self.holds)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub name: String,
    pub description: String,
    pub direction: Direction,
    pub samples: usize,
    /// Replicas left out (solver failures or outside `Ξ`).
    pub excluded: usize,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    /// No non-vacuous row fails.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass() != Some(false))
    }

    /// The inequality holds on every row, vacuous ones included.
    pub fn holds_everywhere(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# report: {}", self.name).unwrap();
        writeln!(s, "# {}", self.description).unwrap();
        writeln!(s, "# samples: {}, excluded: {}", self.samples, self.excluded).unwrap();
        let rule = match self.direction {
            Direction::AtMost => "empirical <= bound + allowance",
            Direction::AtLeast => "empirical >= bound",
        };
        writeln!(s, "# pass: {rule}; vacuous rows have a trivial bound and are not counted").unwrap();
        writeln!(s, "t,empirical,stderr,bound,pass").unwrap();
        for r in &self.rows {
            let pass = match r.pass() {
                None => "vacuous",
                Some(true) => "true",
                Some(false) => "false",
            };
            writeln!(s, "{},{},{},{},{}", r.t, r.empirical, r.stderr, r.bound, pass).unwrap();
        }
        s
    }
}

fn binomial_stderr(f: f64, n: usize) -> f64 {
    (f * (1.0 - f) / n as f64).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_count(n: usize, min: usize, what: &str) -> AppResult<()> {
    if n < min {
        Err(AppError::Config(format!("{what} needs at least {min} replicas, got {n}")))
    } else {
        Ok(())
    }
}

/// Two-sided tail of mean-centered values against `envelope(t)`; passes
/// where the frequency is at most envelope + `slack` + 3 stderr.
fn centered_tail(
    name: &str,
    description: String,
    values: &[f64],
    excluded: usize,
    t_grid: &[f64],
    slack: f64,
    envelope: impl Fn(f64) -> f64,
) -> TailReport {
    let m = mean(values);
    let rows = t_grid
        .iter()
        .map(|&t| {
            let hits = values.iter().filter(|&&v| (v - m).abs() > t).count();
            let empirical = hits as f64 / values.len() as f64;
            let stderr = binomial_stderr(empirical, values.len());
            let bound = envelope(t);
            TailRow {
                t,
                empirical,
                stderr,
                bound,
                holds: empirical <= bound + slack + 3.0 * stderr,
                vacuous: bound >= 1.0,
            }
        })
        .collect();
    TailReport {
        name: name.into(),
        description,
        direction: Direction::AtMost,
        samples: values.len(),
        excluded,
        rows,
    }
}

/// Tail of the mean-centered `log(Z cap)` against `2 e^{-t²/(β k_J)²}`.
pub fn capacity_concentration(
    results: &[ReplicaResult],
    excluded: usize,
    beta: f64,
    k_j: f64,
    t_grid: &[f64],
) -> AppResult<TailReport> {
    check_count(results.len(), MIN_TAIL_REPLICAS, "capacity concentration")?;
    let values: Vec<f64> = results.iter().map(|r| r.log_z_cap).collect();
    let s = beta * k_j;
    Ok(centered_tail(
        "capacity_concentration",
        format!("P[|log(Z cap) - mean| > t] vs 2 exp(-t^2/(beta k_J)^2), beta k_J = {s}"),
        &values,
        excluded,
        t_grid,
        0.0,
        |t| 2.0 * (-(t / s).powi(2)).exp(),
    ))
}

/// Tail of the mean-centered `log(Z ‖h‖_μ)` against
/// `2 e^{-((t - c_N)/(β k_J))²} + e^{-k_1 N}` (1 for `t <= c_N`), with
/// `slack` added to the envelope.
#[allow(clippy::too_many_arguments)]
pub fn harmonic_concentration(
    results: &[ReplicaResult],
    excluded: usize,
    beta: f64,
    k_j: f64,
    k1: f64,
    c_shift: f64,
    slack: f64,
    t_grid: &[f64],
) -> AppResult<TailReport> {
    check_count(results.len(), MIN_TAIL_REPLICAS, "harmonic concentration")?;
    let n = results[0].n;
    let values: Vec<f64> = results.iter().map(|r| r.log_z_harm).collect();
    let s = beta * k_j;
    let floor = (-k1 * n as f64).exp();
    Ok(centered_tail(
        "harmonic_concentration",
        format!(
            "P[|log(Z |h|) - mean| > t] vs 2 exp(-((t - c)/(beta k_J))^2) + exp(-k1 N), c = {c_shift}, slack {slack}"
        ),
        &values,
        excluded,
        t_grid,
        slack,
        |t| if t <= c_shift { 1.0 } else { 2.0 * (-((t - c_shift) / s).powi(2)).exp() + floor },
    ))
}

/// Frequency of `e^{-t-α_N} <= E/Ẽ <= e^{t+2α_N}` against the confidence
/// `1 - 4e^{-t²/(2βk_J)²} - slack`.
pub fn ratio_tail(
    results: &[ReplicaResult],
    excluded: usize,
    beta: f64,
    k_j: f64,
    slack: f64,
    t_grid: &[f64],
) -> AppResult<TailReport> {
    check_count(results.len(), 2, "ratio tail")?;
    let s = 2.0 * beta * k_j;
    let rows = t_grid
        .iter()
        .map(|&t| {
            let inside = results
                .iter()
                .filter(|r| {
                    let x = r.log_ratio();
                    -t - r.alpha_n <= x && x <= t + 2.0 * r.alpha_n
                })
                .count();
            let empirical = inside as f64 / results.len() as f64;
            let confidence = 1.0 - 4.0 * (-(t / s).powi(2)).exp();
            let bound = confidence - slack;
            TailRow {
                t,
                empirical,
                stderr: binomial_stderr(empirical, results.len()),
                bound,
                holds: empirical >= bound,
                vacuous: confidence <= 0.0,
            }
        })
        .collect();
    Ok(TailReport {
        name: "ratio_tail".into(),
        description: format!(
            "P[exp(-t-alpha) <= E/E_annealed <= exp(t+2 alpha)] vs 1 - 4 exp(-t^2/(2 beta k_J)^2) - {slack}"
        ),
        direction: Direction::AtLeast,
        samples: results.len(),
        excluded,
        rows,
    })
}

/// Tail of `max_σ |H - H̃|` beyond `a_N(b)` against `e^{-b}`, one row per
/// exponent `b`.
pub fn xi_tail(results: &[ReplicaResult], excluded: usize, k_j: f64, exponents: &[f64]) -> AppResult<TailReport> {
    check_count(results.len(), MIN_TAIL_REPLICAS, "xi tail")?;
    let n = results[0].n;
    let rows = exponents
        .iter()
        .map(|&b| {
            let a_n = metastab_core::model::XiSpec::for_exponent(b, k_j, n).a_n;
            let misses = results.iter().filter(|r| !(r.xi_max_dev < a_n)).count();
            let empirical = misses as f64 / results.len() as f64;
            let stderr = binomial_stderr(empirical, results.len());
            let bound = (-b).exp();
            TailRow { t: b, empirical, stderr, bound, holds: empirical <= bound + 3.0 * stderr, vacuous: bound >= 1.0 }
        })
        .collect();
    Ok(TailReport {
        name: "xi_tail".into(),
        description: "P[max |H - H_annealed| >= a_N] vs exp(-b_N); column t holds b_N".into(),
        direction: Direction::AtMost,
        samples: results.len(),
        excluded,
        rows,
    })
}

/// Per-coordinate bounded differences of a functional of independent inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDifferences {
    pub c: Vec<f64>,
}

impl BoundedDifferences {
    /// `c_i = 2βk_J/N` for each of the `N(N-1)/2` couplings, valid for
    /// `log(Z cap)` and `log(Z ‖h‖_μ)`.
    pub fn coupling_functional(beta: f64, k_j: f64, n: usize) -> Self {
        Self { c: vec![2.0 * beta * k_j / n as f64; n * (n - 1) / 2] }
    }

    /// `v = (1/4) Σ c_i²`.
    pub fn variance_proxy(&self) -> f64 {
        self.c.iter().map(|c| c * c).sum::<f64>() / 4.0
    }
}

/// Two-sided tail of mean-centered samples of a bounded-difference
/// functional against `e^{-t²/(2v)}`.
pub fn mcdiarmid(
    name: &str,
    values: &[f64],
    certificate: Option<&BoundedDifferences>,
    t_grid: &[f64],
) -> AppResult<TailReport> {
    let cert = match certificate {
        Some(c) if !c.c.is_empty() && c.c.iter().all(|x| *x >= 0.0 && x.is_finite()) => c,
        _ => return Err(AppError::Config(format!("{name}: a bounded-difference certificate is required"))),
    };
    check_count(values.len(), 2, name)?;
    let v = cert.variance_proxy();
    Ok(centered_tail(
        name,
        format!("P[|X - mean| > t] vs exp(-t^2/(2v)), v = {v}"),
        values,
        0,
        t_grid,
        0.0,
        |t| if v == 0.0 { 0.0 } else { (-t * t / (2.0 * v)).exp() },
    ))
}

/// Samples of a sum of `coords` independent `±1/2` signs (bounded
/// differences 1 each).
pub fn binomial_oracle_samples(coords: usize, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, 0, Domain::Auxiliary);
    (0..samples)
        .map(|_| {
            let mut left = coords;
            let mut ups = 0u32;
            while left > 0 {
                let take = left.min(64);
                let word = rng.next_u64();
                let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
                ups += (word & mask).count_ones();
                left -= take;
            }
            ups as f64 - coords as f64 / 2.0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub q: f64,
    /// `(mean of ratio^q)^{1/q}`.
    pub norm: f64,
    pub alpha: f64,
    /// Smallest `c` for which both bounds hold at this `(N, q)`.
    pub c_needed: f64,
    /// `e^{-α}(1 - c/√N)` and `e^{4qα}(1 + c/√N)` at the fitted `c`.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub c: f64,
    pub c_max: f64,
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.c.is_finite() && self.c <= self.c_max
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# report: ratio_moments").unwrap();
        writeln!(s, "# ratio L^q norms vs exp(-alpha)(1 - c/sqrt N) and exp(4 q alpha)(1 + c/sqrt N)").unwrap();
        writeln!(s, "# fitted c = {}, pass if c <= {}: {}", self.c, self.c_max, self.passed()).unwrap();
        writeln!(s, "n,q,norm,alpha,c_needed,lower,upper").unwrap();
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{},{},{}", r.n, r.q, r.norm, r.alpha, r.c_needed, r.lower, r.upper).unwrap();
        }
        s
    }
}

/// Fits the smallest `c` making both moment bounds hold at every size and
/// every `q`. `runs` holds the results at each size.
pub fn ratio_moments(runs: &[&[ReplicaResult]], q_list: &[f64], c_max: f64) -> AppResult<MomentReport> {
    let mut rows = Vec::new();
    for results in runs {
        check_count(results.len(), 2, "ratio moments")?;
        let n = results[0].n;
        let alpha = mean(&results.iter().map(|r| r.alpha_n).collect::<Vec<_>>());
        for &q in q_list {
            // log-sum-exp keeps large ratios finite
            let logs: Vec<f64> = results.iter().map(|r| q * r.log_ratio()).collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_mean = top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / logs.len() as f64).ln();
            let norm = (log_mean / q).exp();
            let root = (n as f64).sqrt();
            let c_lower = root * (1.0 - norm * alpha.exp());
            let c_upper = root * (norm * (-4.0 * q * alpha).exp() - 1.0);
            rows.push(MomentRow { n, q, norm, alpha, c_needed: c_lower.max(c_upper).max(0.0), lower: 0.0, upper: 0.0 });
        }
    }
    let c = rows.iter().map(|r| r.c_needed).fold(0.0, f64::max);
    for r in rows.iter_mut() {
        let root = (r.n as f64).sqrt();
        r.lower = (-r.alpha).exp() * (1.0 - c / root);
        r.upper = (4.0 * r.q * r.alpha).exp() * (1.0 + c / root);
    }
    Ok(MomentReport { c, c_max, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfRow {
    pub n: usize,
    pub samples: usize,
    pub alpha: f64,
    pub max_error: f64,
    pub bound: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfReport {
    pub rows: Vec<MgfRow>,
}

impl MgfReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.failures == 0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# report: mgf").unwrap();
        writeln!(s, "# max over random sigma and both signs of |log E[exp(+-beta Delta)] - alpha_N|").unwrap();
        writeln!(s, "# vs (beta k_J)^3/(2N); pass if no sample exceeds the bound").unwrap();
        writeln!(s, "n,samples,alpha,max_error,bound,failures").unwrap();
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{},{}", r.n, r.samples, r.alpha, r.max_error, r.bound, r.failures).unwrap();
        }
        s
    }
}

/// Exact conditional mgf of `±βΔ_N(σ)` at `samples` uniform configurations
/// per size, on the environment of replica 0.
pub fn mgf_report(
    spec: &DisorderSpec,
    params: &ModelParams,
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> AppResult<MgfReport> {
    let mut rows = Vec::new();
    for &n in sizes {
        let cm = sample_couplings(spec, n, RandomSeed::new(seed, 0))?;
        let alpha = metastab_core::disorder::alpha_n(&cm, params.beta);
        let bound = mgf_remainder_bound(params.beta, spec.k_j, n);
        let mut rng = rng::stream(seed, n as u64, Domain::Auxiliary);
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut max_error: f64 = 0.0;
        let mut failures = 0;
        for _ in 0..samples {
            let s = SpinConfig::from_index(n, rng.next_u64() & mask)?;
            for sign in [Sign::Plus, Sign::Minus] {
                let err = (conditional_log_mgf(&cm, params, &s, sign)? - alpha).abs();
                max_error = max_error.max(err);
                failures += usize::from(err > bound);
            }
        }
        rows.push(MgfRow { n, samples, alpha, max_error, bound, failures });
    }
    Ok(MgfReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationRow {
    pub n: usize,
    pub on_xi: usize,
    pub excluded: usize,
    pub max_deviation: f64,
    pub mean_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub threshold: f64,
    pub rows: Vec<LocalizationRow>,
}

impl LocalizationReport {
    /// The largest size is within the threshold and its maximum is below
    /// the smallest size's.
    pub fn passed(&self) -> bool {
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return false;
        };
        let trend = self.rows.len() < 2 || last.max_deviation < first.max_deviation;
        last.on_xi > 0 && last.max_deviation <= self.threshold && trend
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# report: localization").unwrap();
        writeln!(s, "# |harm / mu[S] - 1| over replicas in Xi, S the annealed valley of A").unwrap();
        writeln!(
            s,
            "# pass if the last size has max <= {} and a smaller max than the first size: {}",
            self.threshold,
            self.passed()
        )
        .unwrap();
        writeln!(s, "n,on_xi,excluded,max_deviation,mean_deviation").unwrap();
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{}", r.n, r.on_xi, r.excluded, r.max_deviation, r.mean_deviation).unwrap();
        }
        s
    }
}

/// Localization of the harmonic sum on replicas inside `Ξ`, one row per
/// size (sizes ascending).
pub fn localization(runs: &[&[ReplicaResult]], threshold: f64) -> LocalizationReport {
    let rows = runs
        .iter()
        .filter(|r| !r.is_empty())
        .map(|results| {
            let devs: Vec<f64> =
                results.iter().filter(|r| r.xi_in_event).map(|r| r.localization_error().abs()).collect();
            LocalizationRow {
                n: results[0].n,
                on_xi: devs.len(),
                excluded: results.len() - devs.len(),
                max_deviation: devs.iter().copied().fold(0.0, f64::max),
                mean_deviation: if devs.is_empty() { 0.0 } else { mean(&devs) },
            }
        })
        .collect();
    LocalizationReport { threshold, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(n: usize, i: u64, x: f64) -> ReplicaResult {
        ReplicaResult {
            replica: i,
            seed: RandomSeed::new(0, i),
            n,
            log_z_cap: x,
            log_z_harm: x,
            log_mean_hitting: 0.0,
            alpha_n: 0.0,
            xi_in_event: true,
            xi_max_dev: 0.0,
            log_z_valley: x,
            annealed_log_z_cap: x,
            annealed_log_z_harm: x,
            annealed_log_mean_hitting: 0.0,
        }
    }

    #[test]
    fn deterministic_values_never_exceed() {
        let rs: Vec<_> = (0..200).map(|i| fake(8, i, 1.5)).collect();
        let rep = capacity_concentration(&rs, 0, 1.5, 1.0, &[0.2, 1.0, 3.0]).unwrap();
        assert!(rep.rows.iter().all(|r| r.empirical == 0.0 && r.holds));
        assert!(rep.rows[0].vacuous && !rep.rows[2].vacuous);
        assert!(rep.passed());
        let bounds: Vec<f64> = rep.rows.iter().map(|r| r.bound).collect();
        assert!(bounds.windows(2).all(|w| w[0] > w[1]));
        let ratio = ratio_tail(&rs, 0, 1.5, 1.0, 0.02, &[1.0, 4.0]).unwrap();
        assert!(ratio.rows.iter().all(|r| r.empirical == 1.0));
        assert!(ratio.rows[0].vacuous && ratio.rows[1].pass() == Some(true));
        let loc = localization(&[&rs], 0.05);
        assert_eq!(loc.rows[0].max_deviation, 0.0);
    }

    #[test]
    fn too_few_replicas() {
        let rs: Vec<_> = (0..10).map(|i| fake(8, i, 0.0)).collect();
        assert!(capacity_concentration(&rs, 0, 1.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn shift_loosens_the_harmonic_envelope() {
        let rs: Vec<_> = (0..200).map(|i| fake(8, i, (i % 7) as f64 * 0.1)).collect();
        let tight = harmonic_concentration(&rs, 0, 1.0, 1.0, 0.05, 0.0, 0.02, &[0.5, 1.0, 2.0]).unwrap();
        let loose = harmonic_concentration(&rs, 0, 1.0, 1.0, 0.05, 0.3, 0.02, &[0.5, 1.0, 2.0]).unwrap();
        for (a, b) in tight.rows.iter().zip(&loose.rows) {
            assert!(b.bound >= a.bound);
        }
    }

    #[test]
    fn moment_fit_is_zero_without_disorder() {
        let rs: Vec<_> = (0..20).map(|i| fake(8, i, 0.0)).collect();
        let rep = ratio_moments(&[&rs], &[1.0, 2.0], 100.0).unwrap();
        assert_eq!(rep.c, 0.0);
        assert!(rep.passed());
        assert!(rep.rows.iter().all(|r| r.lower <= r.norm && r.norm <= r.upper));
    }

    #[test]
    fn binomial_oracle_obeys_its_envelope() {
        let coords = 40;
        let xs = binomial_oracle_samples(coords, 20_000, 3);
        let cert = BoundedDifferences { c: vec![1.0; coords] };
        let rep = mcdiarmid("binomial", &xs, Some(&cert), &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((rep.rows[0].bound - (-2.0f64 * 4.0 / 40.0).exp()).abs() < 1e-15);
        assert!(rep.holds_everywhere());
        assert!(mcdiarmid("binomial", &xs, None, &[1.0]).is_err());
    }

    #[test]
    fn constant_functional_has_no_tail() {
        let xs = vec![2.5; 50];
        let cert = BoundedDifferences { c: vec![0.0; 3] };
        let rep = mcdiarmid("constant", &xs, Some(&cert), &[0.1]).unwrap();
        assert_eq!(rep.rows[0].empirical, 0.0);
        assert!(rep.holds_everywhere());
    }

    #[test]
    fn mgf_errors_vanish_for_deterministic_edges() {
        let spec = DisorderSpec::erdos_renyi(1.0, 1.0);
        let rep = mgf_report(&spec, &ModelParams::new(1.5, 0.0).unwrap(), &[8], 20, 1).unwrap();
        assert_eq!(rep.rows[0].max_error, 0.0);
        assert!(rep.passed());
    }
}
