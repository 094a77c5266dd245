use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dimensions: k1 = {k1}, k2 = {k2} (both must be at least 1)")]
    InvalidDims { k1: usize, k2: usize },

    #[error("determinant {det} is not within {tol} of {target}")]
    Determinant { det: f64, target: f64, tol: f64 },

    #[error("trace {trace} exceeds tolerance {tol}")]
    Trace { trace: f64, tol: f64 },

    #[error("matrix is not invertible")]
    Singular,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("lattice reduction failed: {reason}")]
    Reduction { reason: String, basis: DMatrix<f64> },

    #[error("enumeration budget of {budget} lattice points exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all {0} trials aborted")]
    AllTrialsAborted(usize),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed result file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, reason: impl ToString) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            reason: reason.to_string(),
        }
    }
}
