use thiserror::Error;

use crate::sdp::SolverStatus;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigendecomposition did not converge for a {0}x{0} matrix")]
    EigenNonConvergence(usize),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("solver stopped with status {status:?} after {iterations} iterations")]
    Solver {
        status: SolverStatus,
        iterations: usize,
    },

    #[error("structure validation failed: {0}")]
    Structure(String),

    #[error("target has deficient Schmidt rank (smallest coefficient {0:.3e})")]
    SchmidtRankDeficient(f64),

    #[error("dimension {0} too large for this search")]
    DimensionTooLarge(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
