//! End-to-end experiment: replica runs at every size, the report set, and
//! the output directory with its manifest.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult};
use crate::experiments::{run_replicas, RunOutput};
use crate::reports::{self, BoundedDifferences, LocalizationReport, MgfReport, MomentReport, TailReport};

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Tail(TailReport),
    Moments(MomentReport),
    Mgf(MgfReport),
    Localization(LocalizationReport),
}

impl Report {
    pub fn name(&self) -> &str {
        match self {
            Report::Tail(t) => &t.name,
            Report::Moments(_) => "ratio_moments",
            Report::Mgf(_) => "mgf",
            Report::Localization(_) => "localization",
        }
    }

    pub fn passed(&self) -> bool {
        match self {
            Report::Tail(t) => t.passed(),
            Report::Moments(m) => m.passed(),
            Report::Mgf(m) => m.passed(),
            Report::Localization(l) => l.passed(),
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Report::Tail(t) => t.to_csv(),
            Report::Moments(m) => m.to_csv(),
            Report::Mgf(m) => m.to_csv(),
            Report::Localization(l) => l.to_csv(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// One run per size, ascending, main size last.
    pub runs: Vec<RunOutput>,
    pub reports: Vec<Report>,
}

impl ExperimentOutput {
    pub fn main_run(&self) -> &RunOutput {
        self.runs.last().expect("at least one size")
    }

    pub fn failed_reports(&self) -> Vec<&str> {
        self.reports.iter().filter(|r| !r.passed()).map(|r| r.name()).collect()
    }
}

/// Runs every size of `cfg` and builds the reports.
pub fn run_experiment(cfg: &ExperimentConfig) -> AppResult<ExperimentOutput> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for n in cfg.sizes() {
        runs.push(run_replicas(cfg, n, cfg.replicas_at(n))?);
    }
    let main = runs.last().expect("sizes are non-empty");
    let (beta, k_j) = (cfg.model.beta, cfg.disorder.k_j);
    let r = &cfg.reports;
    let excluded = main.failures.len();
    let mut reports = vec![
        Report::Tail(reports::capacity_concentration(&main.results, excluded, beta, k_j, &r.t_grid)?),
        Report::Tail(reports::harmonic_concentration(
            &main.results,
            excluded,
            beta,
            k_j,
            cfg.meta.k1,
            r.c_shift,
            r.slack,
            &r.t_grid,
        )?),
        Report::Tail(reports::ratio_tail(&main.results, excluded, beta, k_j, r.slack, &r.t_grid)?),
    ];
    let per_size: Vec<&[_]> = runs.iter().map(|run| run.results.as_slice()).collect();
    reports.push(Report::Moments(reports::ratio_moments(&per_size, &r.q_list, r.moment_c_max)?));
    let mgf_sizes = if r.mgf_sizes.is_empty() { cfg.sizes() } else { r.mgf_sizes.clone() };
    reports.push(Report::Mgf(reports::mgf_report(&cfg.disorder, &cfg.model, &mgf_sizes, r.mgf_samples, cfg.run.seed)?));
    reports.push(Report::Localization(reports::localization(&per_size, r.localization_threshold)));
    if !r.xi_exponents.is_empty() {
        reports.push(Report::Tail(reports::xi_tail(&main.results, excluded, k_j, &r.xi_exponents)?));
    }
    if r.mcdiarmid {
        let values: Vec<f64> = main.results.iter().map(|x| x.log_z_cap).collect();
        let cert = BoundedDifferences::coupling_functional(beta, k_j, main.n);
        reports.push(Report::Tail(reports::mcdiarmid("mcdiarmid_log_z_cap", &values, Some(&cert), &r.t_grid)?));
    }
    Ok(ExperimentOutput { runs, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub a_n: f64,
    pub replicas: usize,
    pub failures: Vec<crate::experiments::ReplicaFailure>,
}

/// Record of one run: tool version, resolved config, timing and the
/// digest of every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub sizes: Vec<SizeSummary>,
    pub reports: Vec<(String, bool)>,
    pub outputs: Vec<OutputEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `<file name>` into `dir` and returns its inventory entry.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> AppResult<OutputEntry> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| AppError::io(&path, e))?;
    Ok(OutputEntry { file: name.into(), bytes: contents.len(), sha256: digest(contents.as_bytes()) })
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> AppResult<()> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifests always serialize") + "\n";
    std::fs::write(&path, text).map_err(|e| AppError::io(&path, e))
}

/// Writes one CSV per report plus `manifest.json` into `dir`.
pub fn write_experiment(
    dir: &Path,
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    started_unix: u64,
) -> AppResult<RunManifest> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let outputs = out
        .reports
        .iter()
        .map(|r| write_output(dir, &format!("{}.csv", r.name()), &r.to_csv()))
        .collect::<AppResult<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        started_unix,
        finished_unix: unix_now(),
        sizes: out
            .runs
            .iter()
            .map(|r| SizeSummary { n: r.n, a_n: r.a_n, replicas: r.results.len(), failures: r.failures.clone() })
            .collect(),
        reports: out.reports.iter().map(|r| (r.name().to_string(), r.passed())).collect(),
        outputs,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}
