use thiserror::Error;

use crate::linalg::DenseMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty subspace")]
    EmptySubspace,

    #[error("rank deficient: eigenvalue {index} is {value:e} (top eigenvalue {top:e})")]
    RankDeficient { index: usize, value: f64, top: f64 },

    /// The completion solver hit its iteration cap. The last iterate is kept
    /// so callers can inspect or reuse it.
    #[error("matrix completion did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_iterate: Box<DenseMatrix>,
    },

    #[error("no parent needed: index string {0:?} is multilinear")]
    NoParentNeeded(Vec<usize>),

    #[error("slice completion failed at level {level} for parent {parent:?}: {source}")]
    SliceCompletion {
        level: usize,
        parent: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("non-positive component: lambda = {0:e}")]
    NonPositiveComponent(f64),

    #[error("centers are not separated (eta = {0}); merge duplicate or antipodal centers first")]
    NotSeparated(f64),

    #[error("center {0} is the zero vector")]
    ZeroCenter(usize),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the failure is numerical rather than a malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotConverged { .. }
            | Error::RankDeficient { .. }
            | Error::NonPositiveComponent(_)
            | Error::EmptySubspace
            | Error::NotSeparated(_)
            | Error::ZeroCenter(_) => true,
            Error::SliceCompletion { source, .. } | Error::Stage { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}
