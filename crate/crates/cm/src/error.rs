use serde::Serialize;
use thiserror::Error;

use cm_core::classify::ClassifyError;
use cm_core::cooccurrence::CoocError;
use cm_core::corpus::CorpusError;
use cm_core::interchange::InterchangeError;
use cm_core::pipeline::PipelineError;
use cm_core::topics::TopicError;

/// One offending request field, addressed by its dotted path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("invalid request: {}", .0.iter().map(|f| format!("{}: {}", f.path, f.message)).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
    /// Well-formed request the analysis cannot satisfy.
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![FieldError { path: path.into(), message: message.into() }])
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        Error::Internal(e.to_string())
    }
}

impl From<PipelineError> for Error {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidParams(violations) => Error::Validation(
                violations
                    .into_iter()
                    .flat_map(|v| {
                        let message = v.message;
                        v.fields
                            .into_iter()
                            .map(move |f| FieldError { path: format!("params.{f}"), message: message.clone() })
                    })
                    .collect(),
            ),
            PipelineError::Io(e) => Error::Io(e),
            other => Error::Unprocessable(other.to_string()),
        }
    }
}

macro_rules! unprocessable {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Unprocessable(e.to_string())
            }
        }
    )*};
}

unprocessable!(CoocError);

impl From<ClassifyError> for Error {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::AlreadyLabeled(_) | ClassifyError::EmptyQueue => Error::Conflict(e.to_string()),
            ClassifyError::UnknownDocument(_) => Error::NotFound(e.to_string()),
            other => Error::Unprocessable(other.to_string()),
        }
    }
}

impl From<CorpusError> for Error {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(e) => Error::Io(e),
            other => Error::Unprocessable(other.to_string()),
        }
    }
}

impl From<TopicError> for Error {
    fn from(e: TopicError) -> Self {
        match e {
            TopicError::Io(e) => Error::Io(e),
            TopicError::UnknownDocument(d) => Error::NotFound(format!("unknown document {d:?}")),
            other => Error::Unprocessable(other.to_string()),
        }
    }
}

impl From<InterchangeError> for Error {
    fn from(e: InterchangeError) -> Self {
        match e {
            InterchangeError::Io(e) => Error::Io(e),
            other => Error::Unprocessable(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Internal(format!("json: {e}"))
    }
}
