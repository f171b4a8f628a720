use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures while decoding a `.npy` container. Each variant names the header
/// field or region that was at fault.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("magic: expected \\x93NUMPY")]
    BadMagic,
    #[error("version: unsupported format version {major}.{minor} (only 1.0)")]
    UnsupportedVersion { major: u8, minor: u8 },
    #[error("header: {0}")]
    MalformedHeader(String),
    #[error("descr: unsupported dtype {0:?} (expected '<f4' or '|u1')")]
    UnsupportedDtype(String),
    #[error("fortran_order: Fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("shape: unsupported shape {0:?} (expected 2-D or 3-D, every dimension >= 1)")]
    UnsupportedShape(Vec<usize>),
    #[error("data: truncated, expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("data: {extra} trailing bytes after array payload")]
    TrailingBytes { extra: usize },
}

/// Manifest schema violations. `pointer` is a JSON pointer into the document.
#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{pointer}: missing required field")]
    MissingField { pointer: String },
    #[error("{pointer}: {reason}")]
    InvalidField { pointer: String, reason: String },
    #[error("/version: unknown manifest version {0}")]
    UnknownVersion(i64),
    #[error("{pointer}: duplicate image id {id:?}")]
    DuplicateId { pointer: String, id: String },
    #[error("{pointer}: referenced file does not exist: {path}")]
    MissingFile { pointer: String, path: PathBuf },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid seed count k={k}: must be in 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("record {id:?} has no pred_label (required for top-1 accuracy)")]
    MissingPrediction { id: String },
    #[error("refined map contains no foreground object")]
    EmptyObject,
    #[error("fit diverged at step {step}: loss {loss} exceeds 10x initial loss {initial}")]
    Divergence { step: usize, loss: f64, initial: f64 },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{path}: pixel (row {row}, col {col}) has value {value}, masks must be 0 or 255")]
    InvalidMask {
        path: PathBuf,
        row: usize,
        col: usize,
        value: u8,
    },
    #[error("{path}: unsupported image format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: ManifestError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the content
    /// of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
