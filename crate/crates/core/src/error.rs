use std::io;

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument fell outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Session or constellation parameters failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Inputs that must agree in length did not.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Key material was requested for a second use.
    #[error("one-time violation: key {index} was already consumed")]
    OneTimeViolation { index: usize },

    /// Not enough key material left; a fresh K0 must be shared.
    #[error("key exhausted: {0}")]
    KeyExhausted(String),

    /// Parity reconciliation left the two keys different.
    #[error("reconciliation failed: {residual_blocks} block(s) still disagree")]
    ReconciliationFailure { residual_blocks: usize },

    /// The peer broke the message sequence or sent garbage.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The peer rejected the session and told us why.
    #[error("peer rejected session: {0}")]
    Rejected(String),

    #[error(transparent)]
    Frame(#[from] crate::transport::FrameError),

    #[error("channel error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
