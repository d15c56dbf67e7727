use thiserror::Error;

/// Failure modes surfaced by the simulation and optimization routines.
///
/// Construction errors (bad dimensions, out-of-range parameters) are reported
/// eagerly so downstream numeric code can assume validated inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid association matrix: {0}")]
    InvalidAssociation(String),

    #[error("layout generation failed: {0}")]
    LayoutGeneration(String),

    #[error("surrogate objective undefined: log argument {value:.3e} for user {user}")]
    SurrogateDomain { user: usize, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("search space too large: {0}")]
    SearchSpaceTooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
