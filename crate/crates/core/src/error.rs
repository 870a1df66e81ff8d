use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate {kind} identifier \"{id}\"")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cohort too small: {found} matching samples, need at least {needed}")]
    CohortTooSmall { found: usize, needed: usize },

    #[error("constant column for gene \"{0}\": ranks are degenerate")]
    ConstantColumn(String),

    #[error("zero sample variance")]
    ZeroVariance,

    #[error("no variables pass normality filter")]
    NothingPassesFilter,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unpenalized problem ill-posed: covariance matrix is singular")]
    IllPosed,

    #[error("no events")]
    NoEvents,

    #[error("unbounded coefficient for covariate {0}")]
    UnboundedCoefficient(usize),

    #[error("no connected variables to rank")]
    NoConnectedVariables,

    #[error("subset disconnects at all tested rho")]
    SubsetDisconnects,

    #[error("degenerate PI distribution")]
    DegenerateDistribution,

    #[error("degenerate stratification: {0} group is empty")]
    DegenerateStratification(&'static str),

    #[error("zero variance in log-rank statistic")]
    ZeroLogRankVariance,

    #[error("unknown gene \"{0}\"")]
    UnknownGene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
