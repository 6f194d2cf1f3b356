use std::fmt;

use memkeeper::classify::{ClassifierError, TableError};
use memkeeper::dataset::DatasetError;
use memkeeper::memory::MemoryLoadError;
use memkeeper::metrics::MetricError;
use memkeeper::retrieval::RetrievalError;
use memkeeper::{HttpError, SessionError, UpdateError};

/// Exit status 1 for bad input, 2 for failing external services.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    External(String),
}

impl CliError {
    pub fn input(msg: impl fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::External(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::External(m) => write!(f, "external service error: {m}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MemoryLoadError> for CliError {
    fn from(e: MemoryLoadError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::EmptyText => CliError::Input(e.to_string()),
            other => CliError::External(other.to_string()),
        }
    }
}

impl From<HttpError> for CliError {
    fn from(e: HttpError) -> Self {
        CliError::External(e.to_string())
    }
}

impl From<UpdateError> for CliError {
    fn from(e: UpdateError) -> Self {
        let UpdateError::ClassifierFailure { source, .. } = &e;
        match source {
            ClassifierError::EmptyText => CliError::Input(e.to_string()),
            _ => CliError::External(e.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::ClassifierFailure(u) => u.into(),
            SessionError::GeneratorFailure(_) | SessionError::SummarizerFailure(_) => {
                CliError::External(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}
