use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is singular to working precision (pivot {pivot} at column {column})")]
    SingularPivot { column: usize, pivot: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("cholesky factorization failed at column {column}")]
    NotPositiveDefinite { column: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("resolution rule violated: h = {h} exceeds pi/(5 k_H) = {bound}")]
    UnderResolved { h: f64, bound: f64 },
    #[error("subdomain {subdomain}: local problem is singular")]
    SingularSubdomain { subdomain: usize },
    #[error("coarse operator is singular")]
    SingularCoarse,
    #[error("preconditioner `{label}` is not {required}")]
    Contract { label: String, required: &'static str },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { context, expected, found }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
