use thiserror::Error;

/// Errors shared by all model and diagnostics modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("zero-probability prefix: bit {bit} at position {position} is impossible under the prior")]
    ZeroProbabilityPrefix { bit: u8, position: usize },

    #[error("block length {k} exceeds sequence length {n}")]
    BlockTooLong { k: usize, n: usize },

    #[error("sequence too short at test index {index}: need {needed} bits, have {available}")]
    InsufficientLength {
        index: u32,
        needed: usize,
        available: usize,
    },

    #[error("exact enumeration limited to n <= {max}, got {n}; use the Monte Carlo estimator")]
    EnumerationTooLarge { n: u64, max: u64 },

    #[error("dependency cone spans {bits} source bits, above the cap of {cap}; use the Monte Carlo estimator")]
    ConeTooLarge { bits: usize, cap: usize },

    #[error("halo exhausted: time {t} exceeds the window halo depth {t_max}")]
    HaloExhausted { t: i64, t_max: i64 },

    #[error("not a probability distribution: {message}")]
    NotADistribution { message: String },
}

impl Error {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
