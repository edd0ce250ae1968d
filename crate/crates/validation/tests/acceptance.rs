//! Acceptance criteria. Each prints one `PASS`/`FAIL` line with the measured
//! values; the process fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use metastab::config::ExperimentConfig;
use metastab::experiments::ReplicaResult;
use metastab::reports::{self, BoundedDifferences};
use metastab::suite::{run_experiment, ExperimentOutput};
use metastab_core::annealed::{
    critical_field, local_minima, metastable_sets, spinodal_field, BirthDeathChain, FreeEnergySpec,
};
use metastab_core::disorder::{sample_couplings, CouplingMatrix, DisorderSpec, RandomSeed};
use metastab_core::dynamics::{detailed_balance_defect, first_hitting, Start, DEFAULT_BUDGET};
use metastab_core::math::rel_diff;
use metastab_core::model::{max_delta, ModelParams, XiSpec};
use metastab_core::potential::{ExactChain, Flow, MetaSpec};
use metastab_core::rng::{stream, unit_f64, Domain};
use metastab_core::{SpinConfig, StateSet};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// The seeded N = 10 instance of criteria 1, 2 and 11.
fn instance() -> (CouplingMatrix, ModelParams, StateSet, StateSet) {
    let cm = sample_couplings(&DisorderSpec::erdos_renyi(0.5, 1.0), 10, RandomSeed::new(2024, 0)).unwrap();
    let p = ModelParams::new(1.4, 0.1).unwrap();
    let a = StateSet::nearest_level(10, -0.8).unwrap();
    let b = StateSet::nearest_level(10, 0.8).unwrap();
    (cm, p, a, b)
}

/// The standard replica experiment, run once and shared.
fn standard() -> &'static (ExperimentOutput, Duration) {
    static RUN: OnceLock<(ExperimentOutput, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.toml");
        let cfg = ExperimentConfig::read(&path).unwrap();
        let t = Instant::now();
        let out = run_experiment(&cfg).unwrap();
        (out, t.elapsed())
    })
}

fn standard_results(n: usize) -> &'static [ReplicaResult] {
    let run = standard().0.runs.iter().find(|r| r.n == n).expect("size in the standard sweep");
    assert!(run.failures.is_empty(), "replica failures at N = {n}: {:?}", run.failures);
    &run.results
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn c01_mean_hitting_identity() -> Verdict {
    let start = Instant::now();
    let (cm, p, a, b) = instance();
    let chain = ExactChain::new(&cm, &p).unwrap();
    let sol = chain.solve(&a, &b).unwrap();
    let direct = chain.mean_hitting_time(&a, &b).unwrap().via_direct;
    let err = (direct * sol.cap / sol.harm - 1.0).abs();
    let secs = start.elapsed().as_secs_f64();
    verdict(err <= 1e-9 && secs < 10.0, format!("|E cap / harm - 1| = {err:.2e}, {secs:.2} s"))
}

fn c02_variational_bracket() -> Verdict {
    let (cm, p, a, b) = instance();
    let chain = ExactChain::new(&cm, &p).unwrap();
    let sol = chain.solve(&a, &b).unwrap();
    let cap = sol.cap;
    let (ia, ib) = (a.indicator().unwrap(), b.indicator().unwrap());
    let mut rng = stream(2024, 0, Domain::Auxiliary);
    let mut min_energy = f64::INFINITY;
    for k in 0..100 {
        // half perturb the equilibrium potential, half are uniform noise
        let eps = if k < 50 { 0.5 * unit_f64(&mut rng) } else { 0.0 };
        let f: Vec<f64> = (0..chain.states())
            .map(|s| {
                if ia[s] {
                    1.0
                } else if ib[s] {
                    0.0
                } else if k < 50 {
                    sol.h[s] + eps * (unit_f64(&mut rng) - 0.5)
                } else {
                    unit_f64(&mut rng)
                }
            })
            .collect();
        min_energy = min_energy.min(chain.dirichlet_energy_on(&f, &a, &b).unwrap());
    }
    let mut max_inverse = 0.0f64;
    for k in 0..20 {
        let phi = Flow::random_unit(&a, &b, 1 + 5 * k, &mut rng).unwrap();
        max_inverse = max_inverse.max(1.0 / chain.thomson_energy(&phi, &a, &b).unwrap());
    }
    let e_h = chain.dirichlet_energy_on(&sol.h, &a, &b).unwrap();
    let d_star = chain.thomson_energy(&chain.harmonic_flow(&sol), &a, &b).unwrap();
    let (eq_dir, eq_thom) = (rel_diff(e_h, cap), rel_diff(1.0 / d_star, cap));
    let pass = min_energy >= cap && max_inverse <= cap && eq_dir <= 1e-8 && eq_thom <= 1e-8;
    verdict(
        pass,
        format!(
            "cap = {cap:.6e}, min E(f) / cap = {:.4}, max 1/D(phi) / cap = {:.4}, equality gaps {eq_dir:.1e} / {eq_thom:.1e}",
            min_energy / cap,
            max_inverse / cap
        ),
    )
}

fn c03_exact_lumping() -> Verdict {
    let start = Instant::now();
    let n = 12;
    let spec = FreeEnergySpec::new(1.5, 0.05, 1.0).unwrap();
    let ms = metastable_sets(&spec, n).unwrap();
    let chain = ExactChain::new(&CouplingMatrix::constant(n, 1.0, 1.0).unwrap(), &ModelParams::new(1.5, 0.05).unwrap())
        .unwrap();
    let (a, b) = (&ms.sets[1], &ms.sets[0]);
    let cap = chain.capacity(a, b).unwrap();
    let mh = chain.mean_hitting_time(a, b).unwrap();
    let lumped = BirthDeathChain::new(n, 1.5, 0.05, 1.0).unwrap().hitting(ms.levels[1], ms.levels[0]).unwrap();
    let d_cap = rel_diff(cap, lumped.log_cap.exp());
    let d_direct = rel_diff(mh.via_direct, lumped.log_via_direct.exp());
    let d_identity = rel_diff(mh.via_identity, lumped.log_via_identity.exp());
    let secs = start.elapsed().as_secs_f64();
    let worst = d_cap.max(d_direct).max(d_identity);
    verdict(
        worst <= 1e-9 && secs < 30.0,
        format!("cap {d_cap:.1e}, mean hitting {d_direct:.1e} / {d_identity:.1e} relative, {secs:.2} s"),
    )
}

fn c04_capacity_concentration() -> Verdict {
    let results = standard_results(12);
    let elapsed = standard().1.as_secs_f64();
    let rep = reports::capacity_concentration(results, 0, 1.5, 1.0, &[0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
    let rows: Vec<String> =
        rep.rows.iter().map(|r| format!("t={}: {:.4}±{:.4} vs {:.3}", r.t, r.empirical, r.stderr, r.bound)).collect();
    let vacuous = rep.rows.iter().filter(|r| r.vacuous).count();
    verdict(
        rep.holds_everywhere() && elapsed < 1800.0,
        format!(
            "R = {}, {}; {vacuous}/5 envelopes >= 1; experiment (N = 8, 10, 12) took {elapsed:.0} s",
            results.len(),
            rows.join(", ")
        ),
    )
}

fn c05_mgf_remainder() -> Verdict {
    let rep = reports::mgf_report(
        &DisorderSpec::erdos_renyi(0.5, 1.0),
        &ModelParams::new(1.5, 0.05).unwrap(),
        &[8, 12, 16],
        100,
        2024,
    )
    .unwrap();
    let rows: Vec<String> =
        rep.rows.iter().map(|r| format!("N={}: {:.2e} <= {:.4} ({} over)", r.n, r.max_error, r.bound, r.failures)).collect();
    verdict(rep.passed(), rows.join(", "))
}

fn c06_xi_tail() -> Verdict {
    let (n, k_j, reps) = (12, 1.0, 5000u64);
    let spec = DisorderSpec::erdos_renyi(0.5, k_j);
    let p = ModelParams::new(1.5, 0.05).unwrap();
    let devs: Vec<f64> = (0..reps)
        .map(|r| {
            let cm = sample_couplings(&spec, n, RandomSeed::new(77, r)).unwrap();
            max_delta(&cm, &p).unwrap()
        })
        .collect();
    let mut pass = true;
    let mut rows = Vec::new();
    for b in [0.5, 1.0, 2.0, 4.0] {
        let a_n = XiSpec::for_exponent(b, k_j, n).a_n;
        let freq = devs.iter().filter(|&&d| !(d < a_n)).count() as f64 / reps as f64;
        let se = (freq * (1.0 - freq) / reps as f64).sqrt();
        let bound = (-b).exp();
        pass &= freq <= bound + 3.0 * se;
        rows.push(format!("b={b} (a_N={a_n:.3}): {freq:.4} vs {bound:.4}"));
    }
    let max = devs.iter().copied().fold(0.0, f64::max);
    verdict(pass, format!("R = {reps}, largest max|H - H~| = {max:.3}; {}", rows.join(", ")))
}

fn c07_ratio_sandwich() -> Verdict {
    let results = standard_results(12);
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let rep = reports::ratio_tail(results, 0, 1.5, 1.0, 0.02, &grid).unwrap();
    let live: Vec<String> = rep
        .rows
        .iter()
        .filter(|r| !r.vacuous)
        .map(|r| format!("t={}: {:.4} >= {:.4}", r.t, r.empirical, r.bound))
        .collect();
    let vacuous: Vec<String> = rep.rows.iter().filter(|r| r.vacuous).map(|r| r.t.to_string()).collect();
    verdict(
        rep.passed() && !live.is_empty(),
        format!("{}; vacuous at t = {}", live.join(", "), vacuous.join(", ")),
    )
}

fn c08_ratio_moments() -> Verdict {
    let runs = [standard_results(8), standard_results(10), standard_results(12)];
    let rep = reports::ratio_moments(&runs, &[1.0, 2.0], 100.0).unwrap();
    let rows: Vec<String> = rep.rows.iter().map(|r| format!("N={} q={}: {:.4}", r.n, r.q, r.norm)).collect();
    verdict(rep.passed(), format!("fitted c = {}; norms {}", rep.c, rows.join(", ")))
}

fn c09_localization() -> Verdict {
    let runs = [standard_results(8), standard_results(10), standard_results(12)];
    let rep = reports::localization(&runs, 0.05);
    let rows: Vec<String> =
        rep.rows.iter().map(|r| format!("N={}: max {:.4} ({} in Xi)", r.n, r.max_deviation, r.on_xi)).collect();
    verdict(rep.passed(), format!("{}; need max <= 0.05 at N=12 and below N=8", rows.join(", ")))
}

fn c10_critical_field() -> Verdict {
    let mut worst = 0.0f64;
    for beta in [1.2, 1.5, 2.0, 3.0] {
        worst = worst.max((critical_field(beta, 1.0).unwrap() - spinodal_field(beta, 1.0).unwrap()).abs());
    }
    let minima = local_minima(&FreeEnergySpec::new(2.0, 0.0, 1.0).unwrap()).unwrap();
    let ok_minima =
        minima.len() == 2 && (minima[0] + 0.9575040).abs() <= 1e-6 && (minima[1] - 0.9575040).abs() <= 1e-6;
    verdict(
        worst <= 1e-8 && ok_minima,
        format!("max |closed form - spinodal| = {worst:.1e}, minima at beta=2, h=0: {minima:.7?}"),
    )
}

fn c11_simulation() -> Verdict {
    let (cm, p, a, b) = instance();
    let chain = ExactChain::new(&cm, &p).unwrap();
    let defect = detailed_balance_defect(chain.landscape());
    let sol = chain.solve(&a, &b).unwrap();
    let law: Vec<(SpinConfig, f64)> =
        sol.nu.iter().map(|&(s, w)| (SpinConfig::from_index(10, s).unwrap(), w)).collect();
    let mut rng = stream(2024, 1, Domain::Auxiliary);
    let times: Vec<f64> = (0..10_000)
        .map(|_| {
            first_hitting(&cm, &p, Start::Law(&law), &b, DEFAULT_BUDGET, &mut rng, None)
                .unwrap()
                .completed()
                .expect("budget suffices")
                .elapsed_time
        })
        .collect();
    let (mean, se) = mean_and_stderr(&times);
    let exact = sol.mean_hitting_time();
    let z = (mean - exact) / se;
    verdict(
        z.abs() <= 3.0 && defect <= 1e-12,
        format!("sampled {mean:.4} ± {se:.4} vs exact {exact:.4} ({z:+.2} stderr); detailed-balance defect {defect:.1e}"),
    )
}

fn c12_certificate() -> Verdict {
    let spec = FreeEnergySpec::new(1.5, 0.05, 1.0).unwrap();
    let mut uppers = Vec::new();
    for n in [8, 10, 12] {
        let ms = metastable_sets(&spec, n).unwrap();
        let chain =
            ExactChain::new(&CouplingMatrix::constant(n, 1.0, 1.0).unwrap(), &ModelParams::new(1.5, 0.05).unwrap())
                .unwrap();
        let meta = MetaSpec::new(ms.sets.to_vec(), 2, 0.05, 0.05).unwrap();
        uppers.push(chain.metastability_certificate(&meta, false).unwrap().ratio_upper);
    }
    let decreasing = uppers.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing && uppers[2] < 1.0,
        format!("ratio_upper at N = 8, 10, 12: {uppers:.4?}; needs strict decrease and < 1 at N = 12"),
    )
}

fn c13_mcdiarmid() -> Verdict {
    let coords = 100;
    let samples = reports::binomial_oracle_samples(coords, 20_000, 2024);
    let cert = BoundedDifferences { c: vec![1.0; coords] };
    let oracle = reports::mcdiarmid("binomial", &samples, Some(&cert), &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]).unwrap();
    let values: Vec<f64> = standard_results(10).iter().map(|r| r.log_z_cap).collect();
    let cert = BoundedDifferences::coupling_functional(1.5, 1.0, 10);
    let functional =
        reports::mcdiarmid("log_z_cap", &values, Some(&cert), &[0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 3.0]).unwrap();
    let worst = |r: &reports::TailReport| {
        r.rows.iter().map(|x| x.empirical - x.bound - 3.0 * x.stderr).fold(f64::NEG_INFINITY, f64::max)
    };
    verdict(
        oracle.holds_everywhere() && functional.holds_everywhere(),
        format!(
            "largest (empirical - bound - 3 stderr): binomial {:.4}, log(Z cap) at N=10 {:.4} (v = {})",
            worst(&oracle),
            worst(&functional),
            cert.variance_proxy()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("mean-hitting identity", c01_mean_hitting_identity),
        ("variational bracket", c02_variational_bracket),
        ("exact lumping", c03_exact_lumping),
        ("capacity concentration", c04_capacity_concentration),
        ("mgf remainder", c05_mgf_remainder),
        ("xi tail", c06_xi_tail),
        ("ratio sandwich", c07_ratio_sandwich),
        ("ratio moments", c08_ratio_moments),
        ("harmonic-sum localization", c09_localization),
        ("critical field", c10_critical_field),
        ("simulation unbiasedness", c11_simulation),
        ("metastability certificate", c12_certificate),
        ("bounded differences", c13_mcdiarmid),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        println!("criterion {:>2} {name}: {} | {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 13 criteria pass");
    } else {
        println!("acceptance: {} of 13 criteria fail: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
