//! Replica runs: sample couplings, solve the quenched and annealed chains
//! exactly and record the observables the reports aggregate.

use metastab_core::annealed::{local_minima, FreeEnergySpec};
use metastab_core::disorder::{alpha_n, annealed_couplings, sample_couplings, CouplingMatrix, RandomSeed};
use metastab_core::potential::{ExactChain, MetaSpec};
use metastab_core::{StateSet, Result as CoreResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MetaSource};
use crate::error::{AppError, AppResult};

/// Everything fixed by the annealed environment of a run.
#[derive(Debug, Clone)]
pub struct AnnealedSetup {
    pub meta: MetaSpec,
    pub a: StateSet,
    pub b: StateSet,
    /// Valley of `A` in the metastable partition of the annealed chain.
    pub valley: StateSet,
    pub energies: Vec<f64>,
    pub log_z_cap: f64,
    pub log_z_harm: f64,
    pub log_mean_hitting: f64,
}

/// Observables of one replica. Logarithms of `Z`-scaled quantities stay
/// finite at large `β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaResult {
    pub replica: u64,
    pub seed: RandomSeed,
    pub n: usize,
    pub log_z_cap: f64,
    pub log_z_harm: f64,
    /// `log E_ν[τ_B]` from the hitting-time equation, averaged under `ν`.
    pub log_mean_hitting: f64,
    pub alpha_n: f64,
    pub xi_in_event: bool,
    pub xi_max_dev: f64,
    /// `log(Z μ[S])` for the annealed valley `S` of `A`.
    pub log_z_valley: f64,
    pub annealed_log_z_cap: f64,
    pub annealed_log_z_harm: f64,
    pub annealed_log_mean_hitting: f64,
}

impl ReplicaResult {
    /// `log(E_ν[τ_B] / Ẽ_ν̃[τ̃_B])`.
    pub fn log_ratio(&self) -> f64 {
        self.log_mean_hitting - self.annealed_log_mean_hitting
    }

    /// `log(harm / cap)`, the identity route to `log E_ν[τ_B]`.
    pub fn log_mean_hitting_identity(&self) -> f64 {
        self.log_z_harm - self.log_z_cap
    }

    /// `‖h‖_μ / μ[S] - 1`.
    pub fn localization_error(&self) -> f64 {
        (self.log_z_harm - self.log_z_valley).exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaFailure {
    pub replica: u64,
    pub message: String,
}

/// Results at one size, sorted by replica index.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub n: usize,
    pub a_n: f64,
    pub results: Vec<ReplicaResult>,
    pub failures: Vec<ReplicaFailure>,
}

/// Candidate metastable sets at size `n`, before ordering.
pub fn candidate_sets(cfg: &ExperimentConfig, n: usize) -> AppResult<Vec<StateSet>> {
    let sets = match &cfg.meta.source {
        MetaSource::Auto { pbar } => {
            let pbar = match pbar.or_else(|| cfg.disorder.constant_mean()) {
                Some(p) => p,
                None => {
                    return Err(AppError::Config(
                        "automatic metastable sets need meta.pbar for this disorder".into(),
                    ))
                }
            };
            let spec = FreeEnergySpec::new(cfg.model.beta, cfg.model.h, pbar)?;
            let minima = local_minima(&spec)?;
            if minima.len() < 2 {
                return Err(AppError::Config(format!(
                    "the reference free energy (beta = {}, h = {}, pbar = {pbar}) has a single minimum",
                    cfg.model.beta, cfg.model.h
                )));
            }
            minima.iter().map(|&m| StateSet::nearest_level(n, m)).collect::<CoreResult<Vec<_>>>()?
        }
        MetaSource::Levels { magnetizations } => {
            magnetizations.iter().map(|&m| StateSet::nearest_level(n, m)).collect::<CoreResult<Vec<_>>>()?
        }
        MetaSource::Explicit { states } => states
            .iter()
            .map(|s| StateSet::from_indices(n, s.iter().copied()))
            .collect::<CoreResult<Vec<_>>>()?,
    };
    let refs: Vec<&StateSet> = sets.iter().collect();
    metastab_core::stateset::check_disjoint(n, &refs)
        .map_err(|_| AppError::Config(format!("metastable sets coincide or overlap at N = {n}")))?;
    Ok(sets)
}

/// Orders the sets under the annealed chain and solves it.
pub fn annealed_setup(cfg: &ExperimentConfig, annealed: &CouplingMatrix) -> AppResult<AnnealedSetup> {
    let n = annealed.n();
    let chain = ExactChain::new(annealed, &cfg.model)?;
    let meta = MetaSpec::new(candidate_sets(cfg, n)?, cfg.meta.index, cfg.meta.k1, cfg.meta.k2)?
        .sort_by_weight(&chain)?;
    let (a, b) = meta.target_pair()?;
    let valley = chain.metastable_partition(&meta)?.valley(meta.index - 1)?;
    let sol = chain.solve(&a, &b)?;
    let log_mean_hitting = log_direct_mean(&chain, &b, &sol.nu)?;
    Ok(AnnealedSetup {
        energies: chain.landscape().energies().to_vec(),
        log_z_cap: sol.log_z_cap,
        log_z_harm: sol.log_z_harm,
        log_mean_hitting,
        meta,
        a,
        b,
        valley,
    })
}

fn log_direct_mean(chain: &ExactChain, b: &StateSet, nu: &[(u64, f64)]) -> CoreResult<f64> {
    let times = chain.hitting_times(b)?;
    Ok(nu.iter().map(|&(s, p)| p * times[s as usize]).sum::<f64>().ln())
}

fn run_one(cfg: &ExperimentConfig, n: usize, a_n: f64, replica: u64, shared: Option<&AnnealedSetup>) -> AppResult<ReplicaResult> {
    let seed = RandomSeed::new(cfg.run.seed, replica);
    let cm = sample_couplings(&cfg.disorder, n, seed)?;
    let own;
    let setup = match shared {
        Some(s) => s,
        None => {
            own = annealed_setup(cfg, &annealed_couplings(&cm))?;
            &own
        }
    };
    let chain = ExactChain::new(&cm, &cfg.model)?;
    let sol = chain.solve(&setup.a, &setup.b)?;
    let xi_max_dev = chain
        .landscape()
        .energies()
        .iter()
        .zip(&setup.energies)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(ReplicaResult {
        replica,
        seed,
        n,
        log_z_cap: sol.log_z_cap,
        log_z_harm: sol.log_z_harm,
        log_mean_hitting: log_direct_mean(&chain, &setup.b, &sol.nu)?,
        alpha_n: alpha_n(&cm, cfg.model.beta),
        xi_in_event: xi_max_dev < a_n,
        xi_max_dev,
        log_z_valley: chain.log_z_measure(&setup.valley)?,
        annealed_log_z_cap: setup.log_z_cap,
        annealed_log_z_harm: setup.log_z_harm,
        annealed_log_mean_hitting: setup.log_mean_hitting,
    })
}

/// Runs `replicas` replicas at size `n` on the current rayon pool. Each
/// replica depends only on the config and its index, so results do not
/// depend on scheduling; solver failures are collected per replica.
pub fn run_replicas(cfg: &ExperimentConfig, n: usize, replicas: usize) -> AppResult<RunOutput> {
    cfg.model.check_enumerable(n)?;
    let a_n = cfg.reports.a_n.resolve(cfg.disorder.k_j, cfg.meta.k1, n)?.a_n;
    let shared = if cfg.disorder.has_fixed_environment() {
        let cm = sample_couplings(&cfg.disorder, n, RandomSeed::new(cfg.run.seed, 0))?;
        Some(annealed_setup(cfg, &annealed_couplings(&cm))?)
    } else {
        None
    };
    let outcomes: Vec<(u64, AppResult<ReplicaResult>)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| (r, run_one(cfg, n, a_n, r, shared.as_ref())))
        .collect();
    let mut results = Vec::with_capacity(replicas);
    let mut failures = Vec::new();
    for (replica, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            // configuration problems are not per-replica failures
            Err(e @ AppError::Config(_)) if shared.is_some() => return Err(e),
            Err(e) => failures.push(ReplicaFailure { replica, message: e.to_string() }),
        }
    }
    Ok(RunOutput { n, a_n, results, failures })
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(p: f64, replicas: usize) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
            [model]
            beta = 2.0
            h = 0.05
            [disorder]
            kind = "erdos_renyi"
            p = {p}
            k_j = 1.0
            [meta]
            source = "auto"
            pbar = 1.0
            [run]
            n = 8
            replicas = {replicas}
            seed = 5
            "#
        ))
        .unwrap()
    }

    #[test]
    fn deterministic_disorder_matches_annealed() {
        let out = run_replicas(&config(1.0, 2), 8, 2).unwrap();
        assert!(out.failures.is_empty());
        for r in &out.results {
            assert_eq!(r.log_z_cap, r.annealed_log_z_cap);
            assert_eq!(r.log_mean_hitting, r.annealed_log_mean_hitting);
            assert_eq!(r.alpha_n, 0.0);
            assert_eq!(r.xi_max_dev, 0.0);
        }
    }

    #[test]
    fn identity_and_direct_routes_agree() {
        let out = run_replicas(&config(0.5, 6), 8, 6).unwrap();
        for r in &out.results {
            assert!((r.log_mean_hitting - r.log_mean_hitting_identity()).abs() < 1e-9);
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let cfg = config(0.5, 12);
        let one = with_threads(1, || run_replicas(&cfg, 8, 12)).unwrap().unwrap();
        let four = with_threads(4, || run_replicas(&cfg, 8, 12)).unwrap().unwrap();
        assert_eq!(one.results, four.results);
    }

    #[test]
    fn heavier_set_is_the_target() {
        let cfg = config(0.5, 2);
        let cm = sample_couplings(&cfg.disorder, 8, RandomSeed::new(5, 0)).unwrap();
        let setup = annealed_setup(&cfg, &annealed_couplings(&cm)).unwrap();
        // the minima ±0.957 snap to m = ±1; h > 0 makes all-up M_1 = B
        assert!(setup.b.contains(&metastab_core::SpinConfig::all_up(8)));
        assert!(setup.a.contains(&metastab_core::SpinConfig::all_down(8)));
        assert!(setup.valley.contains(&metastab_core::SpinConfig::all_down(8)));
        assert!(!setup.valley.contains(&metastab_core::SpinConfig::all_up(8)));
    }
}
