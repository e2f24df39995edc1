use physreg_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("acceptance check failed: {0}")]
    Assertion(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 1 validation, 2 runtime, 3 failed `--assert`.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Assertion(_) => 3,
            CliError::Core(e) => match e {
                CoreError::Malformed { .. }
                | CoreError::DanglingTrajectory { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::Invariant(_)
                | CoreError::Config(_)
                | CoreError::ForeignDescriptor { .. }
                | CoreError::Unlabeled(_) => 1,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
