use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative bundle lacks {0}")]
    MissingDerivative(&'static str),
    #[error("unsupported derivative {0} for this input layout")]
    UnsupportedDerivative(&'static str),
    #[error("point ({x}, {t}) lies outside the domain")]
    OutOfDomain { x: f64, t: f64 },
    #[error("no reference solution available: {0}")]
    NoReference(String),
    #[error("oracle did not converge: successive resolutions differ by {diff:e} (limit {limit:e})")]
    OracleConvergence { diff: f64, limit: f64 },
    #[error("oracle not defined for problem {0}")]
    OracleUnsupported(String),
    #[error("parameter vector has length {got}, layout expects {expected}")]
    SegmentMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("trace of {0} below threshold")]
    ZeroTrace(&'static str),
    #[error("zero-norm reference vector")]
    ZeroTruthNorm,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
