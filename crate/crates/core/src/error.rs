use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is singular or rank deficient: {0}")]
    Singular(String),

    #[error("matrix is not Hurwitz: no positive definite Lyapunov solution")]
    NotHurwitz,

    #[error("pair is not controllable: {0}")]
    Uncontrollable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("history query at t = {t} outside stored window [{start}, {end}]")]
    HistoryUnderflow { t: f64, start: f64, end: f64 },

    #[error("simulation diverged at t = {t}: {what}")]
    Divergence { t: f64, what: String },

    #[error("assumption violated at t = {t}: {what} = {value} exceeds bound {bound}")]
    AssumptionViolated {
        t: f64,
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("invalid scenario field `{path}`: {msg}")]
    Schema { path: String, msg: String },

    #[error("sliding surface gives singular SB")]
    SingularSurface,

    #[error("malformed trace: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
