//! Full 2^N chain of the annealed Curie–Weiss model against its
//! magnetization birth–death chain.

use metastab_core::annealed::BirthDeathChain;
use metastab_core::disorder::CouplingMatrix;
use metastab_core::math::rel_diff;
use metastab_core::model::ModelParams;
use metastab_core::potential::ExactChain;
use metastab_core::StateSet;

fn compare(n: usize, beta: f64, h: f64, pbar: f64, ka: usize, kb: usize) {
    let cm = CouplingMatrix::constant(n, pbar, pbar.max(1.0)).unwrap();
    let p = ModelParams::new(beta, h).unwrap();
    let full = ExactChain::new(&cm, &p).unwrap();
    let lumped = BirthDeathChain::new(n, beta, h, pbar).unwrap();

    assert!(rel_diff(full.log_partition(), lumped.log_partition()) < 1e-12);
    for k in 0..=n {
        let level = StateSet::levels(n, [k]).unwrap();
        assert!(rel_diff(full.measure(&level).unwrap(), lumped.mu(k)) < 1e-11, "mu at level {k}");
    }

    let a = StateSet::levels(n, [ka]).unwrap();
    let b = StateSet::levels(n, [kb]).unwrap();
    let sol = full.solve(&a, &b).unwrap();
    let hit = lumped.hitting(ka, kb).unwrap();
    assert!(rel_diff(sol.cap, hit.log_cap.exp()) < 1e-9, "cap: {} vs {}", sol.cap, hit.log_cap.exp());
    assert!(rel_diff(sol.harm, hit.log_harm.exp()) < 1e-9, "harm: {} vs {}", sol.harm, hit.log_harm.exp());
    let mh = full.mean_hitting_time(&a, &b).unwrap();
    assert!(rel_diff(mh.via_identity, hit.log_via_identity.exp()) < 1e-9);
    assert!(rel_diff(mh.via_direct, hit.log_via_direct.exp()) < 1e-9);
}

#[test]
fn lumping_matches_full_chain_upward() {
    compare(6, 1.5, 0.05, 1.0, 1, 5);
    compare(9, 2.0, 0.1, 1.0, 2, 8);
    compare(10, 1.2, -0.2, 0.5, 0, 10);
}

#[test]
fn lumping_matches_full_chain_downward() {
    compare(8, 1.5, 0.05, 1.0, 7, 1);
    compare(11, 0.7, 0.3, 1.0, 9, 3);
}

#[test]
fn lumping_matches_full_chain_at_twelve() {
    compare(12, 1.5, 0.05, 1.0, 1, 11);
}

#[test]
fn adjacent_levels_give_single_edge_capacity() {
    let chain = BirthDeathChain::new(10, 1.5, 0.05, 1.0).unwrap();
    for k in 0..10 {
        let cap = chain.log_capacity(k, k + 1).unwrap();
        assert!(rel_diff(cap, chain.log_mu(k) + chain.log_up(k)) < 1e-13);
    }
}
