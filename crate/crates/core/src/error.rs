use thiserror::Error;

/// Errors surfaced by grid construction, the linear algebra, solvers and
/// diagnostics. CLI exit codes are derived from these variants.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad sizes, tolerances, parameter ranges or config-file contents.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Inputs outside the mathematical domain of an operation
    /// (coincident points, radii off the grid, boundary too close, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A request the radial implementation deliberately does not cover.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The banded factorization hit a zero pivot.
    #[error("singular system: {0}")]
    Singular(String),

    /// Values too large for exponentiation or a report field.
    #[error("range error: {0}")]
    Range(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV / JSON inputs that could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
