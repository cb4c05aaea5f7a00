use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a pointwise function.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("invalid model parameters: {0}")]
    Params(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    /// Requested step exceeds the stability/positivity limit.
    #[error("time step {dt:e} exceeds the {kind} limit {limit:e}")]
    StepSize {
        kind: &'static str,
        dt: f64,
        limit: f64,
    },

    /// Vacuum consistency broken: momentum carried by (near-)empty cells.
    #[error("state integrity violated: {0}")]
    Integrity(String),

    #[error("non-finite value produced by the {term} term")]
    Divergence { term: &'static str },

    #[error("time {t} outside the velocity history span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed snapshot {path}: {msg}")]
    Snapshot { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }
}
