use thiserror::Error;
use tga::attack::AttackError;
use tga::ddne::ModelError;
use tga::evalharness::EvalError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Incompatible(String),
    #[error("{0}")]
    Report(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Incompatible(_) => 4,
            CliError::Report(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Divergence { .. } => CliError::Divergence(e.to_string()),
            ModelError::Io(_) | ModelError::Checkpoint(_) | ModelError::Hyper(_) => CliError::Input(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Incompatible(_) => CliError::Incompatible(e.to_string()),
            EvalError::Attack(AttackError::Model(m)) => m.into(),
            EvalError::Attack(AttackError::Config(_)) => CliError::Input(e.to_string()),
            EvalError::Spec(_) | EvalError::Net(_) | EvalError::NoTargets => CliError::Input(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
