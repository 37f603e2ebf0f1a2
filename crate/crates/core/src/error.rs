use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {what} (estimate {estimate:.3e}, tolerance {tolerance:.3e})")]
    Convergence {
        what: String,
        estimate: f64,
        tolerance: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("solver diverged: {what} after {iterations} iterations (residual {residual:.3e})")]
    SolverDivergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("iteration cap of {cap} reached in {what}")]
    IterationCap { what: String, cap: usize },

    #[error("invalid instance: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
