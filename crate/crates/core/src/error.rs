use thiserror::Error;

/// Failure modes shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Model parameters violate an invariant (weights, signs, dimensions).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An evaluation point lies outside the admissible domain.
    #[error("outside domain: {0}")]
    OutsideDomain(String),

    /// A requested combination of options cannot be honoured.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The exact solver's state space exceeds its hard cap.
    #[error("instance too large for exact solver: {states} states exceeds cap {cap}")]
    OracleTooLarge { states: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
