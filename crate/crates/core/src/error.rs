use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("{what}: {count} coordinate(s) outside the domain")]
    Domain { what: &'static str, count: usize },

    #[error("dual-domain violation in conjugate gradient map: {count} coordinate(s) not strictly negative")]
    DualDomain { count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported fidelity/reference pair: ({fidelity}, {reference})")]
    UnsupportedPair {
        fidelity: &'static str,
        reference: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error(
        "positivity safeguard exhausted at iteration {iteration} after {halvings} halvings \
         ({offending} coordinate(s) still infeasible)"
    )]
    SafeguardExhausted {
        iteration: usize,
        halvings: usize,
        offending: usize,
    },

    #[error("image format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for errors caused by the filesystem or file decoding.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Format(_))
    }

    /// True when a solver run aborted because the step safeguard gave up.
    pub fn is_solver_abort(&self) -> bool {
        matches!(self, Error::SafeguardExhausted { .. } | Error::DualDomain { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
