use lama::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(CoreError),

    #[error("{failed} verification check(s) failed")]
    Verification { failed: usize },

    #[error(transparent)]
    Core(CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NumericalFailure(_) | CoreError::LineSearchFailure { .. } => Self::Numerical(e),
            CoreError::Io(io) => Self::Io(io),
            other => Self::Core(other),
        }
    }
}

impl CliError {
    /// 1 for I/O and other failures, 2 config, 3 numerical, 4 verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Verification { .. } => 4,
            Self::Core(_) | Self::Io(_) => 1,
        }
    }
}
