use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("unsupported polynomial degree {0} (supported: 1, 2)")]
    UnsupportedDegree(usize),

    #[error("no quadrature rule with exactness {0} (maximum is 8)")]
    UnsupportedQuadrature(usize),

    #[error("index ({row}, {col}) out of range for a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("matrix is singular to working precision at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear solve failed in Picard iteration {iteration}: {source}")]
    PicardSolve {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("error norm is zero; the discrete solution coincides with the exact one")]
    ExactSolution,

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
