use thiserror::Error;

/// Errors raised by the simulator and its harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller violated a structural precondition (dimension, index, empty input).
    #[error("usage error: {0}")]
    Usage(String),

    /// A non-finite value reached a computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The explicit scheme produced a non-finite value.
    #[error(
        "solver instability at step {step} (t = {time}): cell {cell} became {value}; \
         max |u| before the step was {max_abs_before}"
    )]
    Instability {
        step: usize,
        time: f64,
        cell: usize,
        value: f64,
        max_abs_before: f64,
    },

    /// A run configuration key is missing or invalid.
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    /// The problem does not satisfy the flux/geometry hypotheses.
    #[error("hypothesis validation failed: {0}")]
    Hypothesis(String),

    /// A sweep member failed; `eps` identifies the run.
    #[error("run with eps = {eps} failed: {source}")]
    Run {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the command-line front end: 3 for rejected
    /// configurations or hypotheses, 4 for solver instability, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Hypothesis(_) | Error::Domain(_) | Error::Usage(_) => 3,
            Error::Instability { .. } => 4,
            Error::Run { source, .. } => source.exit_code(),
            Error::Numeric(_) | Error::Io(_) => 1,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
