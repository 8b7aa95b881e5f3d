use thiserror::Error;

use crate::mgcycle::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{key}`: {msg}")]
    InvalidArgument { key: &'static str, msg: String },

    #[error("factorization failed: zero or negative pivot at row {row}")]
    Factorization { row: usize },

    #[error("solver diverged after {} cycles", .report.iterations)]
    Divergence { report: Box<SolveReport> },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(key: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            key,
            msg: msg.into(),
        }
    }
}
