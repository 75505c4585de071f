use spl_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for an empty constraint set, 4 for solver trouble.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Sizing(_) | CoreError::Domain(_) | CoreError::Degenerate(_) => 2,
                CoreError::Infeasible(_) => 3,
                CoreError::IterationLimit { .. } | CoreError::Solver(_) | CoreError::State(_) => 4,
            },
            CliError::Io(_) => 1,
        }
    }
}
