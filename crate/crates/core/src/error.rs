use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range (expected {expected})")]
    IndexOutOfRange { index: usize, expected: String },

    #[error(
        "time index {index}: cloud size {samples} is smaller than the basis dimension {dimension}"
    )]
    InsufficientSamples {
        index: usize,
        samples: usize,
        dimension: usize,
    },

    #[error("non-finite response at row {row}")]
    NonFiniteResponse { row: usize },

    #[error("least-squares solve failed in cell {cell}")]
    LeastSquares { cell: usize },

    #[error("non-finite value while building responses at time index {index}, term {term}")]
    NonFiniteTerm { index: usize, term: usize },

    #[error("diffusion matrix is singular at time index {index} on path {path}")]
    SingularDiffusion { index: usize, path: usize },

    #[error("regression failed at time index {index}: {source}")]
    Regression {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed cloud file: {0}")]
    CloudFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the failure is caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidParameter { .. }
                | Error::IndexOutOfRange { .. }
                | Error::InsufficientSamples { .. }
                | Error::Config { .. }
                | Error::CloudFormat(_)
        )
    }
}
