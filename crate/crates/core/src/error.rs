use std::path::PathBuf;

/// Errors raised by the simulation, analysis and scenario layers.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// Geometry or wrench input for which the requested quantity is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Non-finite or runaway state detected by the integrator.
    #[error("simulation diverged at t = {time:.4} s: {reason}")]
    Divergence { time: f64, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("plot rendering failed: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI, grouped by failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 2,
            Error::Io { .. } | Error::Csv { .. } | Error::Data { .. } | Error::Plot(_) => 3,
            Error::Divergence { .. } => 4,
            Error::Degenerate(_) => 5,
        }
    }
}
