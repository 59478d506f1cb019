use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind}: shape mismatch, {detail}")]
    Shape { kind: &'static str, detail: String },

    #[error("unknown operation kind `{0}`")]
    UnknownOp(String),

    #[error("{kind}: invalid attributes, {detail}")]
    Attrs { kind: &'static str, detail: String },

    #[error("node {0} is not on this tape")]
    NotOnTape(usize),

    #[error("backward from a non-scalar output of shape {0:?} requires a seed gradient")]
    NonScalarOutput(Vec<usize>),

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("{0}")]
    Contract(String),

    #[error("unknown attribution method `{0}`")]
    UnknownMethod(String),

    #[error("{method} is not defined for the {variant} classifier; class-activation maps need a convolutional feature map")]
    UnsupportedVariant { method: String, variant: String },

    #[error("training aborted at epoch {epoch}, step {step}: non-finite loss; last good parameters restored")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint truncated: {0}")]
    CheckpointTruncated(String),

    #[error("checkpoint holds a {found} but a {expected} was requested")]
    CheckpointKind { expected: String, found: String },

    #[error("checkpoint manifest disagrees with its spec: {0}")]
    CheckpointManifest(String),

    #[error("{path}:{line}: {kind}")]
    Csv {
        path: PathBuf,
        line: usize,
        kind: CsvErrorKind,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

/// The individual ways a CSV dataset file can be malformed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsvErrorKind {
    #[error("missing `# shape N C T K` header")]
    MissingHeader,
    #[error("missing column-name header line")]
    MissingColumns,
    #[error("malformed shape header: {0}")]
    BadHeader(String),
    #[error("ragged row: expected {expected} values after the label, found {found}")]
    RaggedRow { expected: usize, found: usize },
    #[error("non-numeric cell `{0}`")]
    NonNumeric(String),
    #[error("label {label} outside the declared class count {classes}")]
    LabelOutOfRange { label: i64, classes: usize },
    #[error("declared {declared} rows, found {found}")]
    RowCount { declared: usize, found: usize },
    #[error("non-finite value `{0}`")]
    NonFiniteValue(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(kind: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            kind,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
