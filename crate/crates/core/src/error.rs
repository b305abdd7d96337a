use thiserror::Error;

/// Errors produced by the inference engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible assignment: {0}")]
    Infeasible(String),

    #[error("invalid manifold shape: {0}")]
    InvalidShape(String),

    #[error("degenerate retraction step: row {row} collapsed to norm {norm:e}")]
    DegenerateStep { row: usize, norm: f64 },

    /// A non-finite objective was produced. The last point with a finite
    /// objective is carried along so callers can inspect or restart from it.
    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        last_point: Option<Box<nalgebra::DMatrix<f64>>>,
    },

    #[error("state space of {states} labelings exceeds the enumeration budget of {budget}")]
    SizeExceeded { states: f64, budget: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Infeasible(_)
            | Error::InvalidShape(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::DegenerateStep { .. } | Error::NumericalFailure { .. } => 3,
            Error::SizeExceeded { .. } => 4,
        }
    }

    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Infeasible(_) => "infeasible",
            Error::InvalidShape(_) => "invalid_shape",
            Error::DegenerateStep { .. } => "degenerate_step",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::SizeExceeded { .. } => "size_exceeded",
            Error::Io(_) => "io",
            Error::Json(_) => "malformed_document",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
