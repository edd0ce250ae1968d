//! Experiment configuration, read from TOML.
//!
//! ```toml
//! format_version = 1
//!
//! [model]
//! beta = 1.5
//! h = 0.05
//!
//! [disorder]
//! kind = "erdos_renyi"
//! p = 0.5
//! k_j = 1.0
//!
//! [meta]
//! source = "auto"   # or "levels" / "explicit"
//! pbar = 1.0        # auto only: mean coupling of the reference free energy
//!
//! [run]
//! n = 12
//! replicas = 2000
//! seed = 2024
//! sweep = [8, 10]
//!
//! [reports]
//! t_grid = [0.2, 0.4, 0.6, 0.8, 1.0]
//! ```
//!
//! `meta.source = "levels"` takes `magnetizations = [m_1, m_2, ...]`, each
//! snapped to the nearest level of the grid at every size; `"explicit"` takes
//! `states = [[...], [...]]` (state indices, only valid for a single size).
//! The candidate sets are always reordered by decreasing weight under the
//! annealed model, and `meta.index` (default 2) selects `A = M_index`,
//! `B = M_1 ∪ … ∪ M_{index-1}`.

use std::path::Path;

use metastab_core::disorder::DisorderSpec;
use metastab_core::model::{ModelParams, XiSpec};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "config_version")]
    pub format_version: u32,
    pub model: ModelParams,
    pub disorder: DisorderSpec,
    #[serde(default)]
    pub meta: MetaConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub reports: ReportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MetaSource {
    /// Levels nearest to the minima of the annealed free energy.
    Auto {
        /// Mean coupling of the reference free energy; defaults to the
        /// constant mean of the disorder.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pbar: Option<f64>,
    },
    Levels {
        magnetizations: Vec<f64>,
    },
    Explicit {
        states: Vec<Vec<u64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    #[serde(flatten)]
    pub source: MetaSource,
    #[serde(default = "default_index")]
    pub index: usize,
    #[serde(default = "default_k")]
    pub k1: f64,
    #[serde(default = "default_k")]
    pub k2: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self { source: MetaSource::Auto { pbar: None }, index: default_index(), k1: default_k(), k2: default_k() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// System size of the main run.
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Further sizes for the trend and moment reports.
    #[serde(default)]
    pub sweep: Vec<usize>,
    /// Replica count at the sweep sizes; defaults to `replicas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_replicas: Option<usize>,
}

/// Choice of the tolerance `a_N` of the event `Ξ(a_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ANRule {
    /// `sqrt(2 k_J (k_1 + log 2) N)`.
    #[default]
    Default,
    /// The `a_N` with `b_N = b`.
    Exponent { b: f64 },
    Fixed { value: f64 },
}

impl ANRule {
    pub fn resolve(&self, k_j: f64, k1: f64, n: usize) -> AppResult<XiSpec> {
        Ok(match *self {
            ANRule::Default => XiSpec::default_rule(k_j, k1, n),
            ANRule::Exponent { b } => XiSpec::for_exponent(b, k_j, n),
            ANRule::Fixed { value } => XiSpec::new(value)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_q_list")]
    pub q_list: Vec<f64>,
    /// Slack `ε` of the asymptotic comparisons.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Shift `c_N` of the harmonic-sum envelope.
    #[serde(default)]
    pub c_shift: f64,
    #[serde(default)]
    pub a_n: ANRule,
    /// Random configurations per size in the mgf report.
    #[serde(default = "default_mgf_samples")]
    pub mgf_samples: usize,
    /// Sizes of the mgf report; defaults to the run sizes.
    #[serde(default)]
    pub mgf_sizes: Vec<usize>,
    #[serde(default = "default_localization")]
    pub localization_threshold: f64,
    /// Largest acceptable fitted constant in the moment report.
    #[serde(default = "default_c_max")]
    pub moment_c_max: f64,
    /// Also report the tail of `max |H - H̃|` at these exponents `b_N`.
    #[serde(default)]
    pub xi_exponents: Vec<f64>,
    /// Also run the bounded-difference harness on `log(Z cap)`.
    #[serde(default)]
    pub mcdiarmid: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        toml::from_str("").expect("all report fields have defaults")
    }
}

fn config_version() -> u32 {
    CONFIG_VERSION
}
fn default_index() -> usize {
    2
}
fn default_k() -> f64 {
    0.05
}
fn default_t_grid() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}
fn default_q_list() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_slack() -> f64 {
    0.02
}
fn default_mgf_samples() -> usize {
    100
}
fn default_localization() -> f64 {
    0.05
}
fn default_c_max() -> f64 {
    100.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// All sizes, main size last.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.run.sweep.iter().copied().filter(|&n| n != self.run.n).collect();
        v.sort_unstable();
        v.dedup();
        v.push(self.run.n);
        v
    }

    pub fn replicas_at(&self, n: usize) -> usize {
        if n == self.run.n {
            self.run.replicas
        } else {
            self.run.sweep_replicas.unwrap_or(self.run.replicas)
        }
    }

    pub fn validate(&self) -> AppResult<()> {
        let bad = |m: String| Err(AppError::Config(m));
        if self.format_version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}", self.format_version));
        }
        self.model.validate()?;
        self.disorder.validate()?;
        for n in self.sizes() {
            if n < 2 {
                return bad(format!("N = {n} is too small"));
            }
            self.model.check_enumerable(n)?;
            if self.replicas_at(n) < 2 {
                return bad(format!("at least 2 replicas are needed, got {} at N = {n}", self.replicas_at(n)));
            }
        }
        if let MetaSource::Explicit { .. } = self.meta.source {
            if !self.run.sweep.is_empty() {
                return bad("explicit metastable sets fix N; remove the sweep".into());
            }
        }
        if let MetaSource::Levels { magnetizations } = &self.meta.source {
            if magnetizations.iter().any(|m| !(-1.0..=1.0).contains(m)) {
                return bad("magnetizations must lie in [-1, 1]".into());
            }
        }
        if !(self.meta.k1 > 0.0 && self.meta.k2 > 0.0) {
            return bad("k1 and k2 must be positive".into());
        }
        let r = &self.reports;
        if r.t_grid.is_empty() || r.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("t_grid must be non-empty and positive".into());
        }
        if r.q_list.iter().any(|q| !(*q >= 1.0 && q.is_finite())) {
            return bad("every q must be at least 1".into());
        }
        if !(r.slack >= 0.0) || !(r.c_shift >= 0.0) || !(r.moment_c_max > 0.0) {
            return bad("slack, c_shift and moment_c_max must be non-negative".into());
        }
        if r.xi_exponents.iter().any(|b| !(*b > 0.0)) {
            return bad("xi exponents must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        beta = 1.5
        h = 0.05
        [disorder]
        kind = "erdos_renyi"
        p = 0.5
        k_j = 1.0
        [run]
        n = 8
        replicas = 10
        seed = 1
    "#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.meta, MetaConfig::default());
        assert_eq!(cfg.reports.q_list, vec![1.0, 2.0]);
        assert_eq!(cfg.model.enumeration_limit, 20);
        assert_eq!(cfg.sizes(), vec![8]);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.meta.source = MetaSource::Levels { magnetizations: vec![-0.8, 0.8] };
        cfg.reports.a_n = ANRule::Exponent { b: 2.0 };
        cfg.run.sweep = vec![6, 4];
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.sizes(), vec![4, 6, 8]);
    }

    #[test]
    fn rejects_single_replica() {
        let text = MINIMAL.replace("replicas = 10", "replicas = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(AppError::Config(_))));
    }

    #[test]
    fn oversize_is_a_capability_error() {
        let text = MINIMAL.replace("n = 8", "n = 24");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(AppError::Capability(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("seed = 1", "seed = 1\nsead = 2");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
