use thiserror::Error;

/// Errors produced by the stability toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite numeric input: {0}")]
    NonFinite(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("step size {dt} is not allowed (must satisfy 0 < dt < 1)")]
    StepSize { dt: f64 },

    #[error("failed to parse system file at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("cannot read `{}`: {source}", path.display())]
    Read {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
