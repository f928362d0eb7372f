//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any stage of the pipeline.
///
/// Variants are grouped so a caller can map them onto coarse exit classes:
/// configuration problems, data/file problems, and numeric failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input failed a structural validation check (ordering, uniqueness, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Shape or length mismatch between related inputs.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A value fell outside the mathematically admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Index outside the valid range.
    #[error("index error: {0}")]
    Index(String),

    /// Malformed row or header in a CSV input.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Cutting-segment isolation failed.
    #[error("segmentation error: {0}")]
    Segmentation(String),

    /// Region slicing produced no usable rows.
    #[error("region error: {0}")]
    Region(String),

    /// Windowing or splitting could not produce a usable dataset.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Scaler is degenerate or missing where it is required.
    #[error("scaling error: {0}")]
    Scaling(String),

    /// Numeric failure at run time (non-finite loss, divergence, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Artifact provenance does not match the requested operation.
    #[error("lineage mismatch: {0}")]
    Lineage(String),

    /// Internal invariant violated; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// I/O failure tagged with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Malformed input tagged with its file and 1-based line number.
    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
