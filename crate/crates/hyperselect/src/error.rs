use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite {what} at sweep {sweep}")]
    Diverged { sweep: usize, what: &'static str },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("step size {s:e} violates the convergence bound {bound:e}")]
    StepBound { s: f64, bound: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dims(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what}: got {got}, expected {want}")))
    }
}
