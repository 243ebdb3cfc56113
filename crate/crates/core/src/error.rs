use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("state has {found} spins, chain has {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("chain of {spins} spins exceeds the exact-simulation cap of {cap} spins")]
    ResourceCap { spins: usize, cap: usize },

    #[error("amplitude of {state} is {magnitude:e}; its phase is undefined")]
    DegenerateAmplitude { state: String, magnitude: f64 },

    #[error("protocol text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
