use thiserror::Error;

pub type Result<T> = std::result::Result<T, PceError>;

#[derive(Debug, Error)]
pub enum PceError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("covariance matrix is not positive semi-definite (pivot {pivot})")]
    Covariance { pivot: usize },

    #[error("value outside the open unit interval: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A Gram-Schmidt candidate collapsed below the dependence tolerance.
    #[error("candidate {index} is numerically dependent on the preceding basis members")]
    Dependence { index: usize },

    /// Least-squares design lost rank at the given column.
    #[error("design matrix is rank deficient at column {column}")]
    Conditioning { column: usize },

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(PceError::Parameter(msg.into()))
}
