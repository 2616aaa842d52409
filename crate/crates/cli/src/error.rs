//! Error classes and their exit codes.

use std::fmt;

use lowmt_core::augment::AugmentError;
use lowmt_core::backends::{BackendError, RegistryError};
use lowmt_core::corpus::CorpusError;
use lowmt_core::experiment::ExperimentError;
use lowmt_core::metrics::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, config values or missing inputs (exit 2).
    Config,
    /// Input data violates a contract (exit 3).
    Data,
    /// Failures while running: backends, adapters, I/O (exit 4).
    Runtime,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Runtime => 4,
        }
    }
}

pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl fmt::Debug for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {:#}", self.kind, self.error)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn config(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        kind: Kind::Config,
        error: e.into(),
    }
}

pub fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        kind: Kind::Data,
        error: e.into(),
    }
}

pub fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        kind: Kind::Runtime,
        error: e.into(),
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => runtime(e),
            CorpusError::InvalidRule { .. } => config(e),
            _ => data(e),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Corpus(c) => c.into(),
            AugmentError::InvalidSpec(_) | AugmentError::MissingGenerator(_) | AugmentError::NotFineTuned(_) | AugmentError::NoWorkers => config(e),
            AugmentError::Backend { .. } | AugmentError::Checkpoint { .. } | AugmentError::MixedWorkers(..) => runtime(e),
            _ => data(e),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => config(e),
            ExperimentError::DirectionMismatch { .. } | ExperimentError::Provenance(_) => data(e),
            _ => runtime(e),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::NotFound(_) | BackendError::DirectionMismatch { .. } => config(e),
            _ => runtime(e),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::InvalidParams(_) => config(e),
            _ => data(e),
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        runtime(e)
    }
}
