use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A hypothesis of one of the bound formulas is violated.
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at iteration {iteration} (risk {risk})")]
    Diverged { iteration: usize, risk: f64 },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Error {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (overflow, divergence) as opposed
    /// to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::Diverged { .. } | Error::Overflow(_) => true,
            Error::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
