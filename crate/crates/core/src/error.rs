use thiserror::Error;

/// Errors produced by the solvers and file formats in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("operator is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("dense eigensolver limited to dimension {cap}, got {dim}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("eigensolver did not converge: worst residual {residual:.3e} > tol {tol:.3e}")]
    NotConverged { residual: f64, tol: f64 },

    #[error("cache format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
