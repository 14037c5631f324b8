use thiserror::Error;

/// Errors produced by the refinement library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid cone specification: {0}")]
    InvalidCone(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "exponential cone projection did not converge (KKT residual {residual:e} at {iterate:?})"
    )]
    ExpProjection { iterate: [f64; 4], residual: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("homogenizing coordinate is zero")]
    ZeroHomogenizer,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("point does not determine a solution or certificate")]
    Indeterminate,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
