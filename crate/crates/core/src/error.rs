use alloc::string::String;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected N = {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("N = {n} exceeds the exact enumeration limit {limit}; use the lumped chain instead")]
    Capability { n: usize, limit: usize },
    #[error("site {site} out of range for N = {n}")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("state sets overlap")]
    Overlap,
    #[error("state set is empty: {0}")]
    EmptySet(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("edge ({i}, {j}) does not carry a two-point law")]
    UnsupportedEdgeLaw { i: usize, j: usize },
    #[error("boundary value violated at state {state}")]
    Boundary { state: usize },
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
