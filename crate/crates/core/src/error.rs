//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::jbpm::MatrixSolverResult;
use crate::solver::SolverResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is rank deficient (smallest/largest singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("SVD did not converge within {max_iters} sweeps")]
    NoConvergence { max_iters: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error(
        "solver hit the iteration cap ({}) with residuals primal={:.3e} dual={:.3e}",
        result.iters, result.primal_residual, result.dual_residual
    )]
    MaxItersExceeded { result: Box<SolverResult> },

    #[error(
        "matrix solver hit the iteration cap ({}) with residuals primal={:.3e} dual={:.3e}",
        result.iters, result.primal_residual, result.dual_residual
    )]
    MatrixMaxItersExceeded { result: Box<MatrixSolverResult> },

    #[error("no 50% crossing in the supplied m-range for k={k}")]
    Unbracketed { k: usize },

    #[error("coefficient cancellation persisted after {retries} redraws")]
    Cancellation { retries: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
