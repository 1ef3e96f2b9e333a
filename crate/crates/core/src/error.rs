use thiserror::Error;

/// Errors raised by model evaluation, priors, samplers and experiments.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability or parameter left its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Gaussian seed vector had the wrong length for its seed map.
    #[error("seed vector length {got}, expected {expected}")]
    SeedLength { expected: usize, got: usize },

    /// A basis or grid index was out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A weight function failed its normalization check.
    #[error("weight not normalized: {0}")]
    Normalization(String),

    /// An input was degenerate (empty split, too few draws, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A configuration value failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// A log-likelihood evaluation returned a non-finite value.
    #[error("non-finite log-likelihood: {0}")]
    NonFinite(String),

    /// The quadrature grid is too coarse for the requested tolerance.
    #[error("quadrature resolution: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
