//! JSON coupling files.
//!
//! A file holds `N`, `k_J`, the generating spec and seed (when known) and one
//! `[J, mean, var]` triple per edge in row-major upper-triangular order.
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! write/read cycle reproduces every bit.

use std::path::Path;

use metastab_core::disorder::{CouplingMatrix, DisorderSpec, RandomSeed};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingFile {
    pub format_version: u32,
    pub n: usize,
    pub k_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<DisorderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<RandomSeed>,
    pub edges: Vec<[f64; 3]>,
}

impl CouplingFile {
    pub fn from_matrix(cm: &CouplingMatrix, spec: Option<DisorderSpec>, seed: Option<RandomSeed>) -> Self {
        let edges = cm
            .couplings()
            .iter()
            .zip(cm.means())
            .zip(cm.variances())
            .map(|((&j, &m), &v)| [j, m, v])
            .collect();
        Self { format_version: FORMAT_VERSION, n: cm.n(), k_j: cm.k_j(), spec, seed, edges }
    }

    pub fn to_matrix(&self) -> AppResult<CouplingMatrix> {
        if self.format_version != FORMAT_VERSION {
            return Err(AppError::Config(format!("unsupported coupling file version {}", self.format_version)));
        }
        let j = self.edges.iter().map(|e| e[0]).collect();
        let mean = self.edges.iter().map(|e| e[1]).collect();
        let var = self.edges.iter().map(|e| e[2]).collect();
        Ok(CouplingMatrix::from_parts(self.n, self.k_j, j, mean, var)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coupling files always serialize")
    }

    pub fn from_json(text: &str) -> AppResult<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Config(format!("malformed coupling file: {e}")))
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| AppError::io(path, e))
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use metastab_core::disorder::sample_couplings;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = DisorderSpec::erdos_renyi(0.37, 1.0);
        let seed = RandomSeed::new(99, 4);
        let cm = sample_couplings(&spec, 12, seed).unwrap();
        let file = CouplingFile::from_matrix(&cm, Some(spec), Some(seed));
        let back = CouplingFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let cm2 = back.to_matrix().unwrap();
        for (a, b) in cm.means().iter().zip(cm2.means()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in cm.variances().iter().zip(cm2.variances()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_wrong_edge_count() {
        let mut file = CouplingFile::from_matrix(&CouplingMatrix::constant(4, 1.0, 1.0).unwrap(), None, None);
        file.edges.pop();
        assert!(matches!(file.to_matrix(), Err(AppError::Config(_))));
    }
}
