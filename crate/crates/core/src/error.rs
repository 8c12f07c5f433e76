use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid state: {0}")]
    State(String),

    /// The requested measurement branch has (numerically) zero probability.
    #[error("degenerate measurement branch (probability {probability:e})")]
    DegenerateBranch { probability: f64 },

    #[error("policy exhausted: {deltas} increments, measurement {requested} requested")]
    Capacity { deltas: usize, requested: usize },

    /// The request is well formed but deliberately not served (cost blowup).
    #[error("refused: {0}")]
    Refused(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
