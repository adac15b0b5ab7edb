use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("size limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("singular retraction core (smallest singular value {sigma_min:e})")]
    SingularCore { sigma_min: f64 },
    #[error("search direction is invisible to the measurement operator")]
    UnmeasuredDirection,
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
