use dmbn_core::graph::GraphError;
use dmbn_core::Error;

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Core(e) => match e {
                Error::Io { .. } => EXIT_IO,
                Error::Graph(
                    GraphError::Io { .. }
                    | GraphError::MissingFile(_)
                    | GraphError::LabelsNotFound(_),
                ) => EXIT_IO,
                Error::Divergence { .. } | Error::NonFiniteGradient(_) => EXIT_DIVERGED,
                _ => EXIT_USAGE,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
