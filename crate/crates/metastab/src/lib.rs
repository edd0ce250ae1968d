//! Disorder Monte Carlo experiments, file formats and the command-line
//! driver around `metastab-core`.

pub mod cli;
pub mod config;
pub mod coupling_file;
pub mod error;
pub mod experiments;
pub mod reports;
pub mod suite;

pub use error::{AppError, AppResult};
