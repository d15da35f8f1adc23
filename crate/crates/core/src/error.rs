use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the gaze-concept pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The input is syntactically broken (bad header, unparseable field).
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    /// The input parses but violates a data invariant.
    #[error("data error in {path}: {message}")]
    Data { path: String, message: String },

    /// Invalid parameter combination or unsupported request.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input sequence too short for the requested operation.
    #[error("size error: {0}")]
    Size(String),

    /// Statistics are undefined on the given data (zero variance, no valid samples).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// An attribution map does not line up with its velocity window.
    #[error("alignment error for window {window_id}: {message}")]
    Alignment { window_id: String, message: String },

    /// Concept influence is undefined for an empty concept segmentation.
    #[error("concept '{concept}' is empty in window {window_id}")]
    EmptyConcept { window_id: String, concept: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; wraps the underlying error.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl std::fmt::Display, message: impl Into<String>) -> Self {
        Error::Format { path: path.to_string(), message: message.into() }
    }

    pub(crate) fn data(path: impl std::fmt::Display, message: impl Into<String>) -> Self {
        Error::Data { path: path.to_string(), message: message.into() }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 usage/configuration, 2 data, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
