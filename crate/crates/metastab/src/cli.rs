//! Command-line surface. Exit codes: 0 ok, 1 I/O, 2 config, 3 capability,
//! 4 acceptance failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use metastab_core::annealed::{
    critical_field, free_energy_curve, local_minima, metastable_sets, spinodal_field, BirthDeathChain,
    FreeEnergySpec,
};
use metastab_core::disorder::{alpha_n, sample_couplings, CouplingMatrix, RandomSeed};
use metastab_core::dynamics::{first_hitting, Jump, Start};
use metastab_core::model::{Landscape, ModelParams};
use metastab_core::potential::{ExactChain, MetaSpec};
use metastab_core::rng::{self, Domain};
use metastab_core::{SpinConfig, StateSet};

use crate::config::ExperimentConfig;
use crate::coupling_file::CouplingFile;
use crate::error::{AppError, AppResult};
use crate::experiments::with_threads;
use crate::suite::{self, unix_now};

#[derive(Debug, Parser)]
#[command(name = "metastab", version, about = "Metastability of Glauber dynamics on random-coupling Ising models")]
pub struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, env = "METASTAB_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a coupling matrix and write it as a coupling file.
    Gen(GenArgs),
    /// Exact potential theory on the full 2^N chain.
    Exact(ExactArgs),
    /// Magnetization chain of the annealed Curie–Weiss model.
    Lumped(LumpedArgs),
    /// Sample hitting times by simulating the dynamics.
    Simulate(SimulateArgs),
    /// Run a replica experiment from a config file.
    Experiment(ExperimentArgs),
    /// Run the built-in invariant checks.
    Check,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Experiment config supplying the disorder, N and seed.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replica index of the sample.
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    /// Overrides `run.n`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Couplings {
    /// Coupling file written by `gen`.
    #[arg(long, conflicts_with = "annealed")]
    pub couplings: Option<PathBuf>,
    /// Use the deterministic Curie–Weiss couplings `pbar` at this N.
    #[arg(long)]
    pub annealed: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub pbar: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub h: f64,
}

impl Couplings {
    fn load(&self) -> AppResult<(CouplingMatrix, ModelParams)> {
        let p = ModelParams::new(self.beta, self.h)?;
        let cm = match (&self.couplings, self.annealed) {
            (Some(path), None) => CouplingFile::read(path)?.to_matrix()?,
            (None, Some(n)) => CouplingMatrix::constant(n, self.pbar, self.pbar.abs().max(1.0))?,
            _ => return Err(AppError::Config("give exactly one of --couplings and --annealed".into())),
        };
        Ok((cm, p))
    }
}

#[derive(Debug, Args)]
pub struct SetArgs {
    /// Set A: `levels:K1,K2` (up counts), `m:M` (nearest level) or
    /// `states:I1,I2` (state indices). Defaults to the lighter metastable
    /// level of the reference free energy.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Set B, same syntax; defaults to the heavier metastable level.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub couplings: Couplings,
    #[command(flatten)]
    pub sets: SetArgs,
    /// Also run the singleton scan for the lower end of the certificate.
    #[arg(long)]
    pub singletons: bool,
    #[arg(long, default_value_t = 0.05)]
    pub k1: f64,
    /// Output CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LumpedArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long, default_value_t = 1.0)]
    pub pbar: f64,
    #[arg(long)]
    pub n: usize,
    /// Report the critical field (needs beta * pbar > 1).
    #[arg(long)]
    pub hc: bool,
    /// Report capacity and mean hitting time between the metastable levels.
    #[arg(long)]
    pub metastable: bool,
    /// Directory for `chain.csv` and `free_energy.csv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub couplings: Couplings,
    #[command(flatten)]
    pub sets: SetArgs,
    #[arg(long, default_value_t = 1000)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start state index; default is the last-exit law on A.
    #[arg(long)]
    pub start: Option<u64>,
    #[arg(long, default_value_t = metastab_core::dynamics::DEFAULT_BUDGET)]
    pub budget: u64,
    /// Per-trajectory CSV (index, elapsed_time, jump_count).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dump (time, site, magnetization) of the first trajectory.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `run.replicas`.
    #[arg(long)]
    pub replicas: Option<usize>,
}

/// Parses and runs; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = cli.threads;
    let result = with_threads(threads, move || dispatch(cli.command)).and_then(|r| r);
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> AppResult<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Lumped(a) => cmd_lumped(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Check => cmd_check(),
    }
}

fn write_file(path: &Path, text: &str) -> AppResult<()> {
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> AppResult<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| AppError::io("<stdout>", e))
        }
    }
}

fn cmd_gen(a: GenArgs) -> AppResult<()> {
    let mut cfg = ExperimentConfig::read(&a.config)?;
    if let Some(n) = a.n {
        cfg.run.n = n;
        cfg.run.sweep.clear();
    }
    cfg.validate()?;
    let seed = RandomSeed::new(a.seed.unwrap_or(cfg.run.seed), a.replica);
    let cm = sample_couplings(&cfg.disorder, cfg.run.n, seed)?;
    CouplingFile::from_matrix(&cm, Some(cfg.disorder.clone()), Some(seed)).write(&a.out)?;
    let m = cm.couplings().len() as f64;
    println!("n = {}, edges = {}", cm.n(), cm.couplings().len());
    println!("alpha_N = {}", alpha_n(&cm, cfg.model.beta));
    println!("mean J = {}", cm.couplings().iter().sum::<f64>() / m);
    println!("mean E[J] = {}", cm.means().iter().sum::<f64>() / m);
    println!("mean Var[J] = {}", cm.variances().iter().sum::<f64>() / m);
    Ok(())
}

fn parse_set(n: usize, text: &str) -> AppResult<StateSet> {
    let bad = || AppError::Config(format!("cannot parse set '{text}'"));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let numbers = |s: &str| -> AppResult<Vec<u64>> {
        s.split(',').map(|x| x.trim().parse::<u64>().map_err(|_| bad())).collect()
    };
    Ok(match kind {
        "levels" => StateSet::levels(n, numbers(rest)?.into_iter().map(|k| k as usize))?,
        "m" => StateSet::nearest_level(n, rest.trim().parse::<f64>().map_err(|_| bad())?)?,
        "states" => StateSet::from_indices(n, numbers(rest)?)?,
        _ => return Err(bad()),
    })
}

/// `(A, B)` from the flags, defaulting to the lighter and heavier levels
/// nearest the reference free-energy minima.
fn resolve_sets(cm: &CouplingMatrix, p: &ModelParams, sets: &SetArgs) -> AppResult<(StateSet, StateSet)> {
    let n = cm.n();
    let (a, b) = match (&sets.a, &sets.b) {
        (Some(a), Some(b)) => (parse_set(n, a)?, parse_set(n, b)?),
        (None, None) => {
            let pbar = cm.means().iter().sum::<f64>() / cm.means().len() as f64;
            let ms = metastable_sets(&FreeEnergySpec::new(p.beta, p.h, pbar)?, n)?;
            let [heavy, light] = ms.sets;
            (light, heavy)
        }
        _ => return Err(AppError::Config("give both --a and --b, or neither".into())),
    };
    metastab_core::stateset::check_disjoint(n, &[&a, &b])?;
    if a.is_empty() || b.is_empty() {
        return Err(AppError::Config("sets A and B must be non-empty".into()));
    }
    Ok((a, b))
}

fn cmd_exact(a: ExactArgs) -> AppResult<()> {
    let (cm, p) = a.couplings.load()?;
    p.check_enumerable(cm.n())?;
    let (set_a, set_b) = resolve_sets(&cm, &p, &a.sets)?;
    let chain = ExactChain::new(&cm, &p)?;
    let sol = chain.solve(&set_a, &set_b)?;
    let mh = chain.mean_hitting_time(&set_a, &set_b)?;
    let meta = MetaSpec::new(vec![set_b.clone(), set_a.clone()], 2, a.k1, a.k1)?.sort_by_weight(&chain)?;
    let cert = chain.metastability_certificate(&meta, a.singletons)?;
    let mut s = String::from("quantity,value\n");
    let mut row = |k: &str, v: f64| writeln!(s, "{k},{v}").unwrap();
    row("n", cm.n() as f64);
    row("capacity", sol.cap);
    row("capacity_escape", sol.cap_escape);
    row("log_z_capacity", sol.log_z_cap);
    row("harmonic_sum", sol.harm);
    row("mean_hitting_identity", mh.via_identity);
    row("mean_hitting_direct", mh.via_direct);
    row("lambda0", cert.eigen.lambda);
    row("lambda0_residual", cert.eigen.residual);
    row("lambda0_lower", cert.eigen.lower());
    if let Some(scan) = cert.singletons {
        row("singleton_min", scan.min_ratio);
    }
    row("certificate_numerator", cert.numerator);
    row("ratio_upper", cert.ratio_upper);
    if let Some(r) = cert.ratio_lower {
        row("ratio_lower", r);
    }
    row("rho", cert.rho);
    row("certified", f64::from(u8::from(cert.certified)));
    emit(a.out.as_deref(), &s)
}

fn cmd_lumped(a: LumpedArgs) -> AppResult<()> {
    let spec = FreeEnergySpec::new(a.beta, a.h, a.pbar)?;
    let chain = BirthDeathChain::new(a.n, a.beta, a.h, a.pbar)?;
    let minima = local_minima(&spec)?;
    println!("minima = {minima:?}");
    if a.hc {
        let hc = critical_field(a.beta, a.pbar)?;
        println!("h_c = {hc}");
        println!("h_c (spinodal search) = {}", spinodal_field(a.beta, a.pbar)?);
    }
    if a.metastable {
        let ms = metastable_sets(&spec, a.n)?;
        let [heavy, light] = ms.levels;
        let hit = chain.hitting(light, heavy)?;
        println!("levels: A = {} up (m = {}), B = {} up (m = {})", light, ms.magnetizations[1], heavy, ms.magnetizations[0]);
        println!("log capacity = {}", hit.log_cap);
        println!("log mean hitting (identity) = {}", hit.log_via_identity);
        println!("log mean hitting (direct) = {}", hit.log_via_direct);
    }
    if let Some(dir) = a.out_dir {
        std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        let mut s = String::from("m,F,mu_hat,b,d\n");
        for r in chain.table() {
            writeln!(s, "{},{},{},{},{}", r.m, r.free_energy, r.mu_hat, r.up, r.down).unwrap();
        }
        write_file(&dir.join("chain.csv"), &s)?;
        let mut s = String::from("x,F\n");
        for (x, f) in free_energy_curve(&spec)? {
            writeln!(s, "{x},{f}").unwrap();
        }
        write_file(&dir.join("free_energy.csv"), &s)?;
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> AppResult<()> {
    let (cm, p) = a.couplings.load()?;
    let (set_a, set_b) = resolve_sets(&cm, &p, &a.sets)?;
    let n = cm.n();
    let exact = if p.check_enumerable(n).is_ok() {
        Some(ExactChain::new(&cm, &p)?.solve(&set_a, &set_b)?)
    } else {
        None
    };
    let law: Vec<(SpinConfig, f64)> = match (a.start, &exact) {
        (Some(s), _) => vec![(SpinConfig::from_index(n, s)?, 1.0)],
        (None, Some(sol)) => {
            sol.nu.iter().map(|&(s, w)| SpinConfig::from_index(n, s).map(|c| (c, w))).collect::<Result<_, _>>()?
        }
        (None, None) => return Err(AppError::Config("--start is required beyond the enumeration limit".into())),
    };
    let mut rng = rng::stream(a.seed, 0, Domain::Auxiliary);
    let mut times = Vec::with_capacity(a.trajectories);
    let mut csv = String::from("index,elapsed_time,jump_count\n");
    let mut dump = String::from("time,site,magnetization\n");
    let mut truncated = 0usize;
    for i in 0..a.trajectories {
        let mut record = |j: &Jump| {
            writeln!(dump, "{},{},{}", j.time, j.site, j.state.magnetization()).unwrap();
        };
        let observer: Option<&mut dyn FnMut(&Jump)> = if i == 0 && a.dump.is_some() { Some(&mut record) } else { None };
        match first_hitting(&cm, &p, Start::Law(&law), &set_b, a.budget, &mut rng, observer)?.completed() {
            Some(h) => {
                writeln!(csv, "{i},{},{}", h.elapsed_time, h.jump_count).unwrap();
                times.push(h.elapsed_time);
            }
            None => truncated += 1,
        }
    }
    if let Some(path) = &a.dump {
        write_file(path, &dump)?;
    }
    if let Some(path) = &a.out {
        write_file(path, &csv)?;
    }
    let k = times.len() as f64;
    let mean = times.iter().sum::<f64>() / k;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
    println!("trajectories = {}, truncated = {truncated}", times.len());
    println!("mean hitting time = {mean} ± {}", (var / k).sqrt());
    if let (Some(sol), None) = (&exact, a.start) {
        println!("exact (last-exit start) = {}", sol.mean_hitting_time());
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> AppResult<()> {
    let started = unix_now();
    let mut cfg = ExperimentConfig::read(&a.config)?;
    if let Some(s) = a.seed {
        cfg.run.seed = s;
    }
    if let Some(r) = a.replicas {
        cfg.run.replicas = r;
    }
    cfg.validate()?;
    let out = suite::run_experiment(&cfg)?;
    let manifest = suite::write_experiment(&a.out_dir, &cfg, &out, started)?;
    for (name, pass) in &manifest.reports {
        println!("{name}: {}", if *pass { "pass" } else { "FAIL" });
    }
    for size in &manifest.sizes {
        if !size.failures.is_empty() {
            println!("N = {}: {} replica failures", size.n, size.failures.len());
        }
    }
    let failed = out.failed_reports();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::Acceptance(format!("failing reports: {}", failed.join(", "))))
    }
}

/// One named invariant and whether it held.
fn invariant_checks() -> AppResult<Vec<(String, bool)>> {
    let mut out = Vec::new();
    let spec = metastab_core::disorder::DisorderSpec::erdos_renyi(0.5, 1.0);
    let cm = sample_couplings(&spec, 8, RandomSeed::new(1, 0))?;
    let p = ModelParams::new(1.4, 0.1)?;
    let land = Landscape::new(&cm, &p)?;
    let total: f64 = land.gibbs_vector().iter().sum();
    out.push(("gibbs normalization".into(), (total - 1.0).abs() < 1e-12));
    out.push((
        "detailed balance".into(),
        metastab_core::dynamics::detailed_balance_defect(&land) < 1e-12,
    ));
    let chain = ExactChain::from_landscape(land);
    let (a, b) = (StateSet::levels(8, [1])?, StateSet::levels(8, [7])?);
    let sol = chain.solve(&a, &b)?;
    out.push(("capacity routes".into(), (sol.cap - sol.cap_escape).abs() <= 1e-9 * sol.cap));
    let mh = chain.mean_hitting_time(&a, &b)?;
    out.push((
        "mean hitting routes".into(),
        (mh.via_identity - mh.via_direct).abs() <= 1e-9 * mh.via_direct,
    ));
    let lumped = BirthDeathChain::new(10, 1.5, 0.05, 1.0)?;
    let full = ExactChain::new(&CouplingMatrix::constant(10, 1.0, 1.0)?, &ModelParams::new(1.5, 0.05)?)?;
    let cap_full = full.capacity(&StateSet::levels(10, [1])?, &StateSet::levels(10, [9])?)?;
    let cap_lumped = lumped.log_capacity(1, 9)?.exp();
    out.push(("exact lumping".into(), (cap_full - cap_lumped).abs() <= 1e-9 * cap_full));
    out.push(("birth-death detailed balance".into(), lumped.detailed_balance_defect() < 1e-12));
    let hc_ok = [1.2, 1.5, 2.0, 3.0].iter().all(|&beta| {
        matches!((critical_field(beta, 1.0), spinodal_field(beta, 1.0)), (Ok(x), Ok(y)) if (x - y).abs() < 1e-8)
    });
    out.push(("critical field routes".into(), hc_ok));
    Ok(out)
}

fn cmd_check() -> AppResult<()> {
    let checks = invariant_checks()?;
    for (name, ok) in &checks {
        println!("{name}: {}", if *ok { "pass" } else { "FAIL" });
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::Acceptance(format!("failing checks: {}", failed.join(", "))))
    }
}
