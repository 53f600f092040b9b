use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("requested rank {requested} exceeds the budget min(rows, cols) = {budget}")]
    RankBudget { requested: usize, budget: usize },

    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigensolver did not converge within {max_iters} iterations ({dim}x{dim} matrix)")]
    EigenNoConvergence { dim: usize, max_iters: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid dictionary geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not enough data: {0}")]
    NotEnoughData(&'static str),

    #[error("data matrix has no nonzero singular value")]
    RankDeficient,

    #[error("eigenvalue {index} has modulus {modulus:e}; its continuous-time exponent is undefined")]
    ZeroEigenvalue { index: usize, modulus: f64 },

    #[error("ISTA diverged at iteration {iteration}: objective {objective:e} exceeds 1e3 x initial {initial:e}")]
    Divergence {
        iteration: usize,
        objective: f64,
        initial: f64,
    },

    #[error(
        "step sizes violate 1/gamma1 - gamma2*sigma1(D)^2 >= beta/2: lhs {lhs:e} < rhs {rhs:e}"
    )]
    StepSizeCondition { lhs: f64, rhs: f64 },

    #[error("non-finite iterate at PDS iteration {0}")]
    NonFiniteIterate(usize),

    #[error("bad magic in field file")]
    BadMagic,

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("dimension overflow in field header")]
    DimOverflow,

    #[error("trailing bytes after field payload: {0}")]
    TrailingBytes(u64),

    #[error("field files must be rank 3, found rank {0}")]
    UnsupportedRank(u64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }
}
