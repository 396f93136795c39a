use std::process::ExitCode;

use fpeval_core::Error as CoreError;

/// Stable process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const CONSISTENCY: u8 = 3;
    pub const MATCHER: u8 = 4;
    pub const MISMATCH: u8 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
    #[error("output directory {0} is locked by another run (remove .lock if stale)")]
    Locked(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Mismatch(_) => exit::MISMATCH,
            CliError::Locked(_) => exit::DATA,
            CliError::Core(e) => match e.root_cause() {
                CoreError::Config(_) | CoreError::Generation(_) => exit::USAGE,
                CoreError::Consistency { .. } => exit::CONSISTENCY,
                CoreError::Matcher { .. } | CoreError::Lookup { .. } => exit::MATCHER,
                _ => exit::DATA,
            },
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}
