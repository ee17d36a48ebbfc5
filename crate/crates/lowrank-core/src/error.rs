//! Crate-wide error type, grouped into the three classes the CLI maps to
//! exit codes: validation, i/o and numerical failures.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by callers that translate errors into process
/// exit codes or report fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Rejected input: bad arguments, malformed configs, shape mismatches.
    Validation,
    /// Filesystem or file-format failures.
    Io,
    /// The computation itself broke down (SVD non-convergence, non-finite
    /// iterates).
    Numerical,
}

/// What is wrong with a PGM file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PgmErrorKind {
    /// Magic number is not `P5` (e.g. ASCII `P2` files are not supported).
    UnsupportedMagic(String),
    /// Header tokens missing or unparseable.
    MalformedHeader(String),
    /// Only 8-bit images (maxval 255) are supported.
    UnsupportedMaxval(u32),
    /// Fewer payload bytes than `width * height`.
    TruncatedPayload { expected: usize, actual: usize },
    /// Bytes left over after the payload.
    TrailingBytes(usize),
}

/// What is wrong with a CSV matrix file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CsvErrorKind {
    /// No rows at all.
    Empty,
    /// Row has a different number of fields than the first row. Rows are
    /// numbered from 1.
    RaggedRow {
        row: usize,
        expected: usize,
        actual: usize,
    },
    /// Field does not parse as a finite number. Rows and columns are
    /// numbered from 1.
    BadNumber {
        row: usize,
        column: usize,
        token: String,
    },
}

impl std::fmt::Display for PgmErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PgmErrorKind::UnsupportedMagic(magic) => {
                write!(f, "magic is {magic:?}, only binary P5 is supported")
            }
            PgmErrorKind::MalformedHeader(detail) => write!(f, "malformed header: {detail}"),
            PgmErrorKind::UnsupportedMaxval(maxval) => {
                write!(f, "maxval {maxval} is unsupported, only 255 is")
            }
            PgmErrorKind::TruncatedPayload { expected, actual } => write!(
                f,
                "payload holds {actual} bytes, the header promises {expected}"
            ),
            PgmErrorKind::TrailingBytes(count) => {
                write!(f, "{count} trailing bytes after the payload")
            }
        }
    }
}

impl std::fmt::Display for CsvErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvErrorKind::Empty => write!(f, "no rows"),
            CsvErrorKind::RaggedRow {
                row,
                expected,
                actual,
            } => write!(f, "row {row} has {actual} values, expected {expected}"),
            CsvErrorKind::BadNumber { row, column, token } => {
                write!(f, "row {row}, column {column}: {token:?} is not a finite number")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{context}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        context: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad PGM: {kind}")]
    Pgm { path: PathBuf, kind: PgmErrorKind },

    #[error("{path}: bad CSV: {kind}")]
    Csv { path: PathBuf, kind: CsvErrorKind },

    #[error("{path}: bad report JSON: {message}")]
    Json { path: PathBuf, message: String },

    #[error("SVD did not converge on a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("at patch anchor ({row}, {col}): {source}")]
    AtAnchor {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Exit-code class of this error (1 validation, 2 i/o, 3 numerical).
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_)
            | Error::InvalidConfig(_)
            | Error::ShapeMismatch { .. } => ErrorClass::Validation,
            Error::Io { .. } | Error::Pgm { .. } | Error::Csv { .. } | Error::Json { .. } => {
                ErrorClass::Io
            }
            Error::SvdFailure { .. } | Error::NumericalBreakdown(_) => ErrorClass::Numerical,
            Error::AtAnchor { source, .. } => source.class(),
        }
    }

    /// Wraps `self` with the patch anchor it occurred at, keeping the class
    /// of the underlying failure.
    pub fn at_anchor(self, row: usize, col: usize) -> Error {
        Error::AtAnchor {
            row,
            col,
            source: Box::new(self),
        }
    }
}
