use thiserror::Error;

/// Error type shared across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{a} is not invertible modulo {modulus}")]
    NotCoprime { a: u64, modulus: u64 },

    #[error("invalid modulus shape: {0}")]
    BadShape(String),

    #[error("congruence system has no solution")]
    NoSolution,

    #[error("range too large: {0}")]
    RangeTooLarge(String),

    #[error("modulus {0} exceeds the supported character modulus limit")]
    ModulusTooLarge(u64),

    #[error("character is not primitive (conductor {conductor} < modulus {modulus})")]
    NotPrimitive { modulus: u64, conductor: u64 },

    #[error("derivative order {j} exceeds supported maximum {max}")]
    DerivOrderTooHigh { j: u32, max: u32 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("instance too large: {0}")]
    SizeTooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
