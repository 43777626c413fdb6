use thiserror::Error;

/// Errors produced by sequence construction, compilation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument was NaN or infinite where a finite value is required.
    #[error("non-finite input for {0}")]
    NonFinite(&'static str),

    /// A numeric argument was outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation over a sequence of values received an empty sequence.
    #[error("empty {0}")]
    Empty(&'static str),

    /// A matrix failed the unitarity check.
    #[error("matrix is not unitary (residual {residual:.3e} exceeds {limit:.3e})")]
    NotUnitary { residual: f64, limit: f64 },

    /// A pulse sequence is missing a required element.
    #[error("sequence has no {0}")]
    MissingElement(&'static str),

    /// The requested analysis is not defined for this sequence.
    #[error("unsupported sequence for {op}: {reason}")]
    UnsupportedSequence { op: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
