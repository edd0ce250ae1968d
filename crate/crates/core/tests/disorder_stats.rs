//! Sampling statistics of the coupling families.

use metastab_core::disorder::{
    alpha_n, edge_count, sample_couplings, DisorderKind, DisorderSpec, Environment, Patterns,
    RandomSeed, VertexLaw,
};
use metastab_core::model::{conditional_mgf_exact, delta_energy, xi_check, ModelParams, Sign, XiSpec};
use metastab_core::rng::{stream, Domain};
use metastab_core::SpinConfig;

#[test]
fn erdos_renyi_moments_match() {
    let spec = DisorderSpec::erdos_renyi(0.3, 1.0);
    let n = 8;
    let reps = 4000;
    let mut sum = vec![0.0; edge_count(n)];
    let mut sum2 = vec![0.0; edge_count(n)];
    for r in 0..reps {
        let cm = sample_couplings(&spec, n, RandomSeed::new(21, r)).unwrap();
        for (e, &j) in cm.couplings().iter().enumerate() {
            sum[e] += j;
            sum2[e] += j * j;
        }
    }
    let overall: f64 = sum.iter().sum::<f64>() / (reps as f64 * edge_count(n) as f64);
    let se = (0.3f64 * 0.7 / (reps as f64 * edge_count(n) as f64)).sqrt();
    assert!((overall - 0.3).abs() < 4.0 * se, "{overall}");
    let var: f64 = sum2.iter().sum::<f64>() / (reps as f64 * edge_count(n) as f64) - overall * overall;
    assert!((var - 0.21).abs() < 0.01, "{var}");
}

#[test]
fn inhomogeneous_shared_environment_is_fixed() {
    let spec = DisorderSpec {
        kind: DisorderKind::Inhomogeneous {
            weights: VertexLaw::Uniform { lo: 0.2, hi: 0.9 },
            environment: Environment::Shared,
        },
        k_j: 1.0,
    };
    let a = sample_couplings(&spec, 7, RandomSeed::new(4, 1)).unwrap();
    let b = sample_couplings(&spec, 7, RandomSeed::new(4, 2)).unwrap();
    assert_eq!(a.means(), b.means());
    assert_ne!(a.couplings(), b.couplings());
    // empirical edge frequency matches the product weights on average
    let reps = 3000;
    let mut freq = vec![0.0; edge_count(7)];
    for r in 0..reps {
        let cm = sample_couplings(&spec, 7, RandomSeed::new(4, r)).unwrap();
        for (f, j) in freq.iter_mut().zip(cm.couplings()) {
            *f += j / reps as f64;
        }
    }
    for (f, m) in freq.iter().zip(a.means()) {
        assert!((f - m).abs() < 4.0 * (m * (1.0 - m) / reps as f64).sqrt() + 1e-9);
    }
}

#[test]
fn hopfield_means_follow_patterns() {
    let patterns = vec![vec![1.0, -1.0, 1.0, 1.0], vec![1.0, 1.0, -1.0, 1.0]];
    let spec = DisorderSpec {
        kind: DisorderKind::DilutedHopfield { patterns: Patterns::Explicit { patterns: patterns.clone() }, p: 0.5 },
        k_j: 2.0,
    };
    let cm = sample_couplings(&spec, 4, RandomSeed::new(1, 0)).unwrap();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let hebb: f64 = patterns.iter().map(|x| x[i] * x[j]).sum();
            assert!((cm.get(i, j) - 0.0).abs() < 1e-15 || (cm.get(i, j) - hebb).abs() < 1e-15);
            let law = cm.edge_law(i, j);
            if hebb != 0.0 {
                assert!((law.unwrap().mean() - 0.5 * hebb).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn mgf_matches_monte_carlo() {
    let n = 6;
    let spec = DisorderSpec::erdos_renyi(0.5, 1.0);
    let p = ModelParams::new(1.5, 0.0).unwrap();
    let s = SpinConfig::from_index(n, 0b010011).unwrap();
    let reference = sample_couplings(&spec, n, RandomSeed::new(2, 0)).unwrap();
    let reps = 40_000;
    let mut vals = Vec::with_capacity(reps);
    for r in 0..reps {
        let cm = sample_couplings(&spec, n, RandomSeed::new(2, r as u64)).unwrap();
        vals.push((1.5 * delta_energy(&cm, &s).unwrap()).exp());
    }
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
    let exact = conditional_mgf_exact(&reference, &p, &s, Sign::Plus).unwrap();
    assert!((mean - exact).abs() < 4.0 * sd / (reps as f64).sqrt(), "{mean} vs {exact}");
}

#[test]
fn xi_complement_rate_below_bound() {
    let n = 8;
    let k_j = 1.0;
    let xs = XiSpec::for_exponent(1.0, k_j, n);
    let spec = DisorderSpec::erdos_renyi(0.5, k_j);
    let p = ModelParams::new(1.0, 0.0).unwrap();
    let reps = 2000;
    let misses = (0..reps)
        .filter(|&r| !xi_check(&sample_couplings(&spec, n, RandomSeed::new(8, r)).unwrap(), &p, &xs).unwrap().in_event)
        .count();
    let bound = xs.complement_bound(k_j, n);
    let freq = misses as f64 / reps as f64;
    assert!(freq <= bound + 3.0 * (bound * (1.0 - bound) / reps as f64).sqrt());
}

#[test]
fn alpha_is_quadratic_in_beta() {
    let cm = sample_couplings(&DisorderSpec::erdos_renyi(0.4, 1.0), 9, RandomSeed::new(1, 1)).unwrap();
    let a1 = alpha_n(&cm, 1.0);
    assert!((alpha_n(&cm, 3.0) - 9.0 * a1).abs() < 1e-14);
    // β²/(2N²) · C(N,2) · p(1-p)
    let expect = 36.0 * 0.24 / (2.0 * 81.0);
    assert!((a1 - expect).abs() < 1e-14);
}

#[test]
fn aux_streams_are_independent_of_disorder_streams() {
    use rand_core::RngCore;
    let mut a = stream(1, 0, Domain::Auxiliary);
    let mut b = stream(1, 0, Domain::Edges);
    assert_ne!(a.next_u64(), b.next_u64());
}
