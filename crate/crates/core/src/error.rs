use thiserror::Error;

/// A configuration value that violates its domain. `key` uses the same
/// spelling as the command-line flag and config-file key.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: &'static str, reason: impl Into<String>) -> Self {
        Self { key, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    /// An engine invariant failed. This is a bug, not a user error.
    #[error("invariant violated at slot {slot}: {detail}")]
    Invariant { slot: usize, detail: String },
    #[error("trace: {0}")]
    Trace(String),
}

impl SimError {
    pub(crate) fn invariant(slot: usize, detail: impl Into<String>) -> Self {
        SimError::Invariant { slot, detail: detail.into() }
    }
}
