use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("all importance weights are zero or undefined")]
    DegenerateWeights,

    #[error("transport marginals are infeasible: {0}")]
    InfeasibleMarginals(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("regularization search failed after {doublings} doublings (final ratio {ratio:e})")]
    RegularizationFailed { doublings: usize, ratio: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("model evaluation failed: {0}")]
    Model(String),

    /// `partial_csv` holds the diagnostics recorded before the abort.
    #[error("filter aborted after {iterations} iterations: {reason}")]
    Aborted { iterations: usize, reason: String, partial_csv: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dims(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(what()))
    }
}
