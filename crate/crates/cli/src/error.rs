use graph_rbm::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(CoreError),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidGraph(_)
            | CoreError::LengthMismatch { .. }
            | CoreError::UnknownEdge(_)
            | CoreError::UnknownVertex(_)
            | CoreError::PartSumMismatch { .. }
            | CoreError::ForceSumMismatch { .. }
            | CoreError::UncoveredPart(_)
            | CoreError::ProbabilitySum(_)
            | CoreError::InvalidPlan(_)
            | CoreError::MisalignedDelta { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::ResourceLimit { .. }
            | CoreError::Parse(_) => CliError::Config(e.to_string()),
            CoreError::Io(io) => CliError::Io(io),
            other => CliError::Numerical(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
