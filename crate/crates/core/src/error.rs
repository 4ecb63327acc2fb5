//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the laboratory operations.
///
/// Statistical *failures* (a test that rejects, a bound that is violated)
/// are never errors: they are reported as data. Errors are reserved for
/// inputs that make an operation meaningless.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation
    /// (for example a hazard rate requested where the survival function vanishes).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numeric grid or table does not cover the requested range.
    #[error("range error: {0}")]
    Range(String),
    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Not enough data for a statistical procedure.
    #[error("data error: {0}")]
    Data(String),
    /// Input is not in general position: two quantities that must differ coincide.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A numerical guard tripped (overflow, probability above one, non-finite value).
    #[error("numeric guard: {0}")]
    Numeric(String),
    /// The forward equation is not explicitly solvable for the given kernel.
    #[error("ill-posed: {0}")]
    IllPosed(String),
}
