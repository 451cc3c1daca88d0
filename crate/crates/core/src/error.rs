use thiserror::Error;

use crate::{config::ConfigError, dataset::DatasetError, dsp::DspError, eval::EvalError};
use crate::{lut::LutError, nn::NnError, oracle::OracleError, sim::SimError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error wrapping the per-module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("preprocessing: {0}")]
    Dsp(#[from] DspError),
    #[error("beam oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("network: {0}")]
    Nn(#[from] NnError),
    #[error("lookup table: {0}")]
    Lut(#[from] LutError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Invalid parameters, flags or config files.
    Config,
    /// Malformed, inconsistent or missing data on disk.
    Data,
    /// Everything else (I/O failures, broken invariants).
    Internal,
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Sim(_) | Error::Oracle(_) | Error::Config(_) => ErrorCategory::Config,
            Error::Dsp(e) => match e {
                DspError::AngleFftTooSmall { .. } | DspError::UnknownKind(_) => ErrorCategory::Config,
                _ => ErrorCategory::Data,
            },
            Error::Nn(e) => match e {
                NnError::Io(_) => ErrorCategory::Internal,
                NnError::UnknownVariant(_) | NnError::InvalidConfig(_) | NnError::KOutOfRange { .. } => {
                    ErrorCategory::Config
                }
                _ => ErrorCategory::Data,
            },
            Error::Lut(e) => match e {
                LutError::Io(_) => ErrorCategory::Internal,
                LutError::KOutOfRange { .. } => ErrorCategory::Config,
                _ => ErrorCategory::Data,
            },
            Error::Dataset(e) => match e {
                DatasetError::Io { .. } => ErrorCategory::Internal,
                DatasetError::BadFractions(_) | DatasetError::BadPercent(_) => ErrorCategory::Config,
                _ => ErrorCategory::Data,
            },
            Error::Eval(e) => match e {
                EvalError::Io(_) | EvalError::Csv(_) | EvalError::Json(_) => ErrorCategory::Internal,
                EvalError::InvalidSpec(_) => ErrorCategory::Config,
                _ => ErrorCategory::Data,
            },
            Error::Context { source, .. } => source.category(),
        }
    }
}
