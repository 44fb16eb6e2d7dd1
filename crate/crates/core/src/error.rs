use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("degenerate pivot: {0}")]
    DegeneratePivot(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step size underflow at t = {t}: dt = {dt:e} fell below dt_min")]
    Stiffness { t: f64, dt: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },

    #[error("solution diverged (non-finite state) at t = {t}")]
    Divergence { t: f64 },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed snapshot file: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::Stiffness { .. }
                | Error::StepBudget { .. }
                | Error::Divergence { .. }
                | Error::DegeneratePivot(_)
                | Error::Internal(_)
        )
    }
}
