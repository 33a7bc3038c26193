use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh generation, material evaluation, assembly and time marching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh input: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fiber directions are parallel; growth direction undefined")]
    ParallelFibers,

    #[error("fiber direction is not a unit vector (norm {0})")]
    NonUnitFiber(f64),

    #[error("inverted element {element}: det F = {det_f:e}")]
    InvertedElement { element: usize, det_f: f64 },

    #[error("inverted material point: det F = {0:e}")]
    InvertedPoint(f64),

    #[error("degenerate surface facet {0}: zero area")]
    DegenerateFacet(usize),

    #[error("linear solver failed: {0}")]
    LinearSolve(String),

    #[error("Newton iteration did not converge at t = {t} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        t: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("step failed at t = {t} after {retries} time-step halvings: {source}")]
    StepFailed {
        t: f64,
        retries: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown node set or surface patch `{0}`")]
    UnknownSet(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) | Error::UnknownSet(_) => {
                ErrorCategory::Config
            }
            Error::InvalidMesh(_) | Error::DegenerateFacet(_) => ErrorCategory::Geometry,
            Error::Io { .. } | Error::Format(_) => ErrorCategory::Io,
            _ => ErrorCategory::Solver,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Geometry,
    Solver,
    Io,
}

impl ErrorCategory {
    /// Process exit code; 0 is reserved for success and 1 for usage errors.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Geometry => 3,
            ErrorCategory::Solver => 4,
            ErrorCategory::Io => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
