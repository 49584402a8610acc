use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("backward pass requested without a preceding training forward pass")]
    NoForwardPass,

    #[error("label {0} is not a valid class index")]
    InvalidLabel(i64),

    #[error("invalid landmark frame: {}", .0.join("; "))]
    InvalidFrame(Vec<String>),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Model file decoding failures, each distinct so callers can tell them apart.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:02x?}, expected \"D2FL\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("truncated model file: need at least {needed} bytes, have {actual}")]
    Truncated { needed: usize, actual: usize },

    #[error("malformed model file: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> Error {
    Error::Shape {
        expected: format!("{expected:?}"),
        actual: format!("{actual:?}"),
    }
}
