use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch in {dim}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        dim: String,
        expected: String,
        actual: String,
    },

    #[error("{op}: invalid parameter: {msg}")]
    Param { op: &'static str, msg: String },

    #[error("{op}: degenerate vector (norm {norm:e}) at row {row}")]
    DegenerateVector {
        op: &'static str,
        row: usize,
        norm: f64,
    },

    #[error("{op}: reduction over an empty axis")]
    EmptyAxis { op: &'static str },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: i64, classes: usize },

    #[error("corrupt {what}: {msg}")]
    Corrupt { what: &'static str, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("class {class} has {available} windows, {requested} requested")]
    Count {
        class: String,
        available: usize,
        requested: usize,
    },

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NumericFailure { epoch: usize, step: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(
        op: &'static str,
        dim: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            op,
            dim: dim.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn param(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Param {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn corrupt(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Corrupt {
            what,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
