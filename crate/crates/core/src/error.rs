use thiserror::Error;

/// Unified error type for every fallible operation in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Dimension mismatch between operands, or an operand with an illegal shape.
    #[error("shape error in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// The operation needs at least one nonzero singular value and the input has none.
    #[error("no spectrum: {0}")]
    NoSpectrum(&'static str),

    /// An iterative kernel failed to converge within its iteration cap.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A sampling distribution with no usable mass (zero matrix, zero total weight).
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    /// Malformed query parameters (out-of-range eps, zero rank, missing dims, ...).
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// A documented precondition of the operation does not hold for these inputs.
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// A generator or experiment specification that fails validation.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Text input that could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A regression report was asked to reconcile solutions that do not belong
    /// to the same (A, b) problem.
    #[error("mismatched problem: {0}")]
    MismatchedProblem(String),

    /// Underlying I/O failure, stringified so the error stays `Clone`.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn shape(context: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            context,
            expected: expected.into(),
            got: got.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
