use std::path::PathBuf;

/// Failures of the tool, each mapped to a stable process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } => 1,
            AppError::Config(_) => 2,
            AppError::Capability(_) => 3,
            AppError::Acceptance(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }
}

impl From<metastab_core::Error> for AppError {
    fn from(e: metastab_core::Error) -> Self {
        use metastab_core::Error as E;
        match e {
            E::Capability { .. } | E::NoConvergence { .. } => AppError::Capability(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
