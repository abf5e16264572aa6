use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition or type invariant.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator produced non-finite values.
    #[error("integration error: {0}")]
    Integration(String),

    /// Grid refinement hit its limit before the monitored quantity settled.
    #[error("convergence error: {what} did not converge ({detail})")]
    Convergence { what: String, detail: String },

    #[error("config error at line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("config error: unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("config error: missing required key(s): {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the run configuration (bad keys, values
    /// outside a parameter's domain).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::ConfigLine { .. }
                | Error::UnknownKey { .. }
                | Error::MissingKeys(_)
                | Error::Config(_)
        )
    }
}
