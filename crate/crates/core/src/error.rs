use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e})")]
    NotPsd { min_eig: f64, max_eig: f64 },

    #[error("bootstrap replicates failed to converge: {failed} of {total}")]
    NonConvergence { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
