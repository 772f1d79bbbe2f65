use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("grid has no background cells; distance transform is undefined")]
    NoBackground,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-positive radius {0}")]
    NonPositiveRadius(f64),

    #[error("no Murray records were accepted")]
    NoAcceptedRecords,

    #[error("flow graph contains a cycle")]
    CyclicGraph,

    #[error("no macular endpoints for class {0}")]
    NoMacularEndpoints(String),

    #[error("synthetic geometry overflow: {0}")]
    GeometryOverflow(String),

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
