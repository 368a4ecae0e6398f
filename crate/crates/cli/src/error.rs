use gwde_core::dimension::DimensionError;
use gwde_core::dynamics::DynamicsError;
use gwde_core::ergodic::ErgodicError;
use gwde_core::extinction::ExtinctionError;
use gwde_core::reproduction::ReproductionError;
use gwde_core::simulate::SimulationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The config or the command line is unusable.
    #[error("config: {0}")]
    Config(String),
    /// Inputs violate a precondition of the requested computation.
    #[error("precondition: {0}")]
    Precondition(String),
    /// The computation stopped short; partial output was written.
    #[error("partial result: {0}")]
    Partial(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Partial(_) => 2,
            CliError::Config(_) | CliError::Precondition(_) => 3,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<ReproductionError> for CliError {
    fn from(e: ReproductionError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::ConvergenceFailure { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<ExtinctionError> for CliError {
    fn from(e: ExtinctionError) -> Self {
        match e {
            ExtinctionError::Reproduction(inner) => inner.into(),
            ExtinctionError::Dynamics(inner) => inner.into(),
            ExtinctionError::NoUpperBracket { .. } => CliError::Partial(e.to_string()),
            ExtinctionError::Stalled { .. } => CliError::Failed(e.to_string()),
            ExtinctionError::DomainError { .. }
            | ExtinctionError::InvalidGrid(_)
            | ExtinctionError::InvalidArgument(_) => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<ErgodicError> for CliError {
    fn from(e: ErgodicError) -> Self {
        match e {
            ErgodicError::Extinction(inner) => inner.into(),
            ErgodicError::Reproduction(inner) => inner.into(),
            ErgodicError::Dynamics(inner) => inner.into(),
            ErgodicError::UncertifiedInput | ErgodicError::InvalidArgument(_) => {
                CliError::Precondition(e.to_string())
            }
        }
    }
}

impl From<DimensionError> for CliError {
    fn from(e: DimensionError) -> Self {
        match e {
            DimensionError::Reproduction(inner) => inner.into(),
            DimensionError::Dynamics(inner) => inner.into(),
            DimensionError::InvalidArgument(_) => CliError::Precondition(e.to_string()),
            DimensionError::RegimeError(_)
            | DimensionError::OutOfRange { .. }
            | DimensionError::InfeasibleLevel { .. } => CliError::Partial(e.to_string()),
            DimensionError::NoConvergence(_) | DimensionError::EigenFailure { .. } => {
                CliError::Failed(e.to_string())
            }
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failed(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(format!("csv: {e}"))
    }
}
