use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the pipeline.
///
/// Variants split into input validation problems (bad files, bad
/// dimensions) and numerical failures (singular inputs, solver breakdown);
/// the CLI maps the two families onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV {path}: {message}")]
    MalformedCsv { path: String, message: String },

    #[error("non-positive price {value} at line {line}, column {column}")]
    NonPositivePrice {
        line: usize,
        column: String,
        value: f64,
    },

    #[error("duplicate date {0}")]
    DuplicateDate(String),

    #[error("dates are not strictly increasing at {0}")]
    UnorderedDates(String),

    #[error("missing value at line {line}, column {column}")]
    MissingValue { line: usize, column: String },

    #[error("insufficient data: need at least {required} rows, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("{0}")]
    Degenerate(String),

    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    /// True for numerical failures (as opposed to input validation errors).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric(_) | Error::NotPsd(_) | Error::Degenerate(_) | Error::Solver(_)
        )
    }
}
