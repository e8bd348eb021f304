use thiserror::Error;

/// Errors raised across the estimation, mapping and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent configuration. `key` names the offending entry.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed or inconsistent input data (log lines, trajectories, clouds).
    #[error("data error: {0}")]
    Data(String),

    /// A caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A measurement was refused and the belief left untouched.
    #[error("measurement rejected: {0}")]
    Rejected(String),

    /// Square-root factorisation failed even after jitter escalation.
    #[error("covariance degenerate: {0}")]
    CovarianceDegenerate(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            Error::Data(_) | Error::Contract(_) | Error::Rejected(_) | Error::Io { .. } => 2,
            Error::CovarianceDegenerate(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
