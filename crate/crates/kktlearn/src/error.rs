use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem: {0}")]
    Spec(String),
    #[error("theta outside its bounds: {0}")]
    ThetaOutOfBounds(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("both safety probes infeasible at {0:?}: no parameter is consistent with the demonstrations")]
    Contradiction(Vec<f64>),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("planning failed: {0}")]
    Planning(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
