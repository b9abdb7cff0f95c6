use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("iteration diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unidentifiable tensor structure for psi4=3")]
    UnidentifiableTensor,

    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
