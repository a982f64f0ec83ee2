use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Gram matrix of the channel to be inverted is singular or too badly
    /// conditioned for exact zero forcing.
    #[error("precoding Gram matrix is singular (condition estimate {condition:e})")]
    PrecodingSingular { condition: f64 },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
