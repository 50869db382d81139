use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A privacy/utility target cannot be met. `min_n` carries the smallest user
    /// count that would make the request feasible, when one exists.
    #[error("infeasible: {reason}")]
    Infeasible { reason: String, min_n: Option<u64> },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("homomorphic overflow budget exceeded ({needed} > {budget} accumulated plaintexts)")]
    OverflowBudget { needed: u64, budget: u64 },

    #[error("authenticated decryption failed at layer {layer}")]
    Decryption { layer: usize },

    #[error("protocol aborted during {step}: {reason}")]
    Abort { step: String, reason: String },

    #[error("enumeration refused: about {size:.3e} outcomes exceeds the limit of {limit:.3e}")]
    TooLarge { size: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible {
            reason: msg.into(),
            min_n: None,
        }
    }

    pub(crate) fn abort(step: impl Into<String>, reason: impl std::fmt::Display) -> Self {
        Error::Abort {
            step: step.into(),
            reason: reason.to_string(),
        }
    }
}
