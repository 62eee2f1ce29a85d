//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Every fallible operation in this crate returns this error type. Variants
/// carry enough context to name the offending field, file, or dimension.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {path}: {source}")]
    MissingFile {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed container: field `{field}`: {reason}")]
    MalformedContainer { field: String, reason: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("header mismatch: {reason}")]
    HeaderMismatch { reason: String },

    #[error("coefficient length mismatch: `{name}` has {got} entries, expected {expected}")]
    CoefficientLengthMismatch {
        name: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("resolution mismatch: {context}: {got} vs {expected}")]
    ResolutionMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("shape mismatch: {context}: got {got}, expected {expected}")]
    ShapeMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid dimension: `{name}` = {value}, must be >= 1")]
    InvalidDimension { name: &'static str, value: usize },

    #[error("channel out of range: {channel} >= {channels}")]
    ChannelOutOfRange { channel: usize, channels: usize },

    #[error("invalid range: {reason}")]
    InvalidRange { reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn malformed(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MalformedContainer {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
