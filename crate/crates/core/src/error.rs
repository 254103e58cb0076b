use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constraint rows are rank deficient (pivot {pivot:.3e} at index {index})")]
    RankDeficient { index: usize, pivot: f64 },

    #[error("rank-one update is near singular (denominator {denominator:.3e}); recompute the inverse from scratch")]
    SingularUpdate { denominator: f64 },

    #[error("appended column lies in the span of the existing columns (residual norm² {residual:.3e})")]
    DependentColumn { residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("solver stalled: {0}")]
    Stalled(String),

    #[error("oracle consistency failure: {0}")]
    Oracle(String),

    #[error("solvers disagree: {0}")]
    Disagreement(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
