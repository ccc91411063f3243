use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured enumeration or size cap was exceeded.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// A constraint set admits no measure.
    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    /// An iterative routine stopped before reaching its tolerance.
    #[error("no convergence: {message} (residuals: {residuals:?})")]
    NonConvergence { message: String, residuals: Vec<f64> },

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
