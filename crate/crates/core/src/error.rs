use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("line search failed at iteration {iteration} after {backtracks} backtracks")]
    LineSearchFailure {
        iteration: usize,
        backtracks: usize,
        trace: Vec<crate::solver::IterationRecord>,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("bad magic in {path:?}: {found:?}")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("truncated container: {0}")]
    Truncated(String),

    #[error("duplicate entry name {0:?}")]
    DuplicateName(String),

    #[error("missing entry {0:?}")]
    MissingEntry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(context: &'static str, expected: &[usize], actual: &[usize]) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}
