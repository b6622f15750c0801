use std::io;

use thiserror::Error;

use crate::Dims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor data contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error(
        "inverse transform left an imaginary residue of {residue:.3e} (threshold {threshold:.3e})"
    )]
    NonRealResult { residue: f64, threshold: f64 },

    #[error("oracle matrix {rows}x{cols} exceeds the size cap of {cap}")]
    OracleTooLarge {
        rows: usize,
        cols: usize,
        cap: usize,
    },

    #[error("tensor is not symmetric: relative asymmetry {asymmetry:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("tensor is not T-PSD: T-eigenvalue {eigenvalue:.6e} is below -{tol:.1e} * sigma1")]
    NotPsd { eigenvalue: f64, tol: f64 },

    #[error("rank {r} is too small: relative residual {residual:.3e}")]
    RankTooSmall { r: usize, residual: f64 },

    #[error("tensor is zero")]
    ZeroTensor,

    #[error("rank mismatch: expected tubal-rank {expected}, eigenvalue {index} is {value:.3e}")]
    RankMismatch {
        expected: usize,
        index: usize,
        value: f64,
    },

    #[error("dense materialization needs {needed} bytes, budget is {budget}")]
    OutOfBudget { needed: usize, budget: usize },

    #[error("iterate diverged at iteration {iteration} (factor norm {norm:.3e})")]
    Diverged { iteration: usize, norm: f64 },

    #[error("sandwich bound violated: e_t={e_t:.6e}, delta={delta:.6e}")]
    SandwichViolated { e_t: f64, delta: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("linear algebra routine failed: {0}")]
    Linalg(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("declared shape {0} overflows the addressable size")]
    ShapeOverflow(Dims),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Caller-side mistakes: bad shapes, bad parameters, malformed files.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ShapeMismatch(_)
                | Error::NonFinite(_)
                | Error::OracleTooLarge { .. }
                | Error::NotSymmetric { .. }
                | Error::NotPsd { .. }
                | Error::RankTooSmall { .. }
                | Error::ZeroTensor
                | Error::RankMismatch { .. }
                | Error::OutOfBudget { .. }
                | Error::InsufficientData(_)
                | Error::InvalidParameter(_)
                | Error::BadMagic(_)
                | Error::TruncatedFile { .. }
                | Error::ShapeOverflow(_)
        )
    }

    /// Failures of the numerics themselves.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonRealResult { .. }
                | Error::Diverged { .. }
                | Error::SandwichViolated { .. }
                | Error::Linalg(_)
        )
    }
}
