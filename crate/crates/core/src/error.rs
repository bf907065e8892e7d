use thiserror::Error;

/// Errors raised by the walk, solver and compiler routines.
#[derive(Debug, Error)]
pub enum QwError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An inverse step was requested for a state whose extremal amplitudes do
    /// not vanish, i.e. a state outside the image of the step operator.
    #[error("state is not in the image of a step: |u(first,down)| = {first_down:.3e}, |u(last,up)| = {last_up:.3e}")]
    NotInImage { first_down: f64, last_up: f64 },

    /// A reachability condition failed while back-solving coins.
    #[error("state is not reachable: step {step} has residual {residual:.3e}")]
    NotReachable { step: usize, residual: f64 },

    /// An iterative numerical procedure did not converge.
    #[error("numerical failure: {message} (best residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl QwError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QwError::Domain(msg.into())
    }
}

pub type Result<T, E = QwError> = std::result::Result<T, E>;
