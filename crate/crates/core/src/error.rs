use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite loss at sample {sample}: {detail}")]
    Numeric { sample: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("aggregation error at client {client}: {message}")]
    Aggregation { client: usize, message: String },

    #[error("client {client}: {source}")]
    Client {
        client: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("cannot normalize weights: {0}")]
    Normalize(String),

    #[error("missing path {}", path.display())]
    MissingPath { path: PathBuf },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn for_client(self, client: usize) -> Self {
        match self {
            e @ Error::Client { .. } => e,
            e => Error::Client {
                client,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Numeric { .. } => "numeric",
            Error::Config(_) => "config",
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::Parse { .. } => "parse",
            Error::Aggregation { .. } => "aggregation",
            Error::Client { source, .. } => source.kind(),
            Error::Diverged(_) => "diverged",
            Error::Normalize(_) => "normalize",
            Error::MissingPath { .. } => "missing-path",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
