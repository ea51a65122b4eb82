//! Crate-wide error type and the exit-code classes used by the CLI.

use thiserror::Error;

/// Coarse classification of failures, mirrored by the CLI exit codes:
/// usage errors exit with 2, data errors with 3, numeric errors with 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("degenerate horizon: {0}")]
    DegenerateHorizon(String),

    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument {arg} outside domain: {message}")]
    Domain { arg: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rank {requested} exceeds limit {limit}")]
    Rank { requested: usize, limit: usize },

    #[error("basis family is ill-conditioned (smallest eigenvalue {min_eigenvalue:.3e})")]
    IllConditionedBasis { min_eigenvalue: f64 },

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("intensity bound violated: observed {observed} exceeds stated bound {bound}")]
    BoundViolation { observed: f64, bound: f64 },

    #[error("numeric failure after {iterations} iterations: {message}")]
    Convergence { iterations: usize, message: String },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_) | Error::Domain { .. } | Error::Shape(_) | Error::Rank { .. } => {
                ErrorClass::Usage
            }
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::DegenerateHorizon(_)
            | Error::Schema { .. } => ErrorClass::Data,
            Error::IllConditionedBasis { .. }
            | Error::UnsupportedBasis(_)
            | Error::BoundViolation { .. }
            | Error::Convergence { .. } => ErrorClass::Numeric,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
