//! Error type of the experiment runner and its mapping to exit codes.

use std::path::PathBuf;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CliError>;

/// Exit code of a run whose assertions all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit code of a run with a failed assertion or a runtime failure.
pub const EXIT_FAIL: i32 = 1;
/// Exit code of a rejected configuration.
pub const EXIT_CONFIG: i32 = 2;

/// Failures of the runner. Assertion failures are not errors: they are
/// recorded in the artifact and only change the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration violates the experiment's schema.
    #[error("config error at `{path}`: {message}")]
    Config {
        /// Dotted path of the offending field (`.` for the document root).
        path: String,
        /// What is wrong with it.
        message: String,
    },
    /// The requested experiment is not registered.
    #[error("unknown experiment `{name}`; registered experiments: {available}")]
    UnknownExperiment {
        /// Requested name.
        name: String,
        /// Comma-separated registry listing.
        available: String,
    },
    /// A laboratory operation failed.
    #[error("{context}: {source}")]
    Core {
        /// What the runner was doing.
        context: String,
        /// Underlying error.
        #[source]
        source: phlab_core::Error,
    },
    /// Reading or writing a file failed.
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        /// File or directory involved.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// Artifacts from different schema versions cannot be combined.
    #[error("schema version mismatch: artifact {artifact} has version {found}, expected {expected}")]
    SchemaVersion {
        /// Version of the first artifact.
        expected: u32,
        /// Offending version.
        found: u32,
        /// Experiment name of the offending artifact.
        artifact: String,
    },
    /// Serializing a report failed.
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Shorthand for a configuration error at `path`.
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }

    /// Process exit code for this error: 2 for anything the user can fix in
    /// the configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::UnknownExperiment { .. } => EXIT_CONFIG,
            CliError::Core { source, .. } => match source {
                phlab_core::Error::Config(_) | phlab_core::Error::Domain(_) => EXIT_CONFIG,
                _ => EXIT_FAIL,
            },
            _ => EXIT_FAIL,
        }
    }
}

/// Attaches context to laboratory errors.
pub trait Context<T> {
    /// Wraps the error with a description of the failed step.
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for phlab_core::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| CliError::Core { context: what.to_string(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("params.m", "bad").exit_code(), EXIT_CONFIG);
        let e: Result<()> = Err(phlab_core::Error::Config("x".into())).context("running");
        assert_eq!(e.unwrap_err().exit_code(), EXIT_CONFIG);
        let e: Result<()> = Err(phlab_core::Error::Data("x".into())).context("running");
        let e = e.unwrap_err();
        assert_eq!(e.exit_code(), EXIT_FAIL);
        assert_eq!(e.to_string(), "running: data error: x");
    }
}
