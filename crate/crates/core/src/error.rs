use thiserror::Error;

use crate::cuts::CutLoopStats;
use crate::model::FitResult;
use crate::solver::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    /// The solver reported a status that cannot occur for a well-formed
    /// regression problem (these problems always admit a constant fit).
    #[error("unexpected solver status {0}")]
    UnexpectedStatus(String),

    #[error("cutting-plane loop hit its cap of {cap} master solves")]
    CutLimit {
        cap: usize,
        best: Box<FitResult>,
        stats: CutLoopStats,
    },

    #[error("subset enumeration needs {needed} fits, above the guard of {limit}")]
    TooManySubsets { needed: u128, limit: u128 },

    #[error("no cross-validation candidate produced a valid score")]
    NoValidCandidate,

    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("report serialization: {0}")]
    Csv(#[from] csv::Error),

    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}
