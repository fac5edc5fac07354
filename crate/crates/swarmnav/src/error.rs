use std::path::PathBuf;

use swarmnav_core::eval::EvalError;
use swarmnav_core::nn::NnError;
use swarmnav_core::ppo::PpoError;
use swarmnav_core::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("incompatible input: {0}")]
    Incompatible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Incompatible(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Mesh(_) | SimError::Overcrowded { .. } => CliError::Config(e.to_string()),
            SimError::Protocol { .. } => CliError::Other(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite(_) | NnError::NonFiniteGradient(_) => CliError::Numeric(e.to_string()),
            NnError::Config(_) => CliError::Config(e.to_string()),
            NnError::Shape { .. } => CliError::Incompatible(e.to_string()),
            NnError::StaleTrace => CliError::Other(e.to_string()),
        }
    }
}

impl From<PpoError> for CliError {
    fn from(e: PpoError) -> Self {
        match e {
            PpoError::Config(_) => CliError::Config(e.to_string()),
            PpoError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            PpoError::Sim(s) => s.into(),
            PpoError::Nn(n) => n.into(),
            PpoError::Length { .. } => CliError::Other(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Incompatible(_) => CliError::Incompatible(e.to_string()),
            EvalError::UndefinedBaseline(_) => CliError::Numeric(e.to_string()),
            EvalError::Sim(s) => s.into(),
            EvalError::Nn(n) => n.into(),
            EvalError::Stalled => CliError::Other(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
