//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the quantizer, channel, detector, and learning loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no training data")]
    NoTrainingData,
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("need at least {needed} samples to learn {needed} codewords, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range for codebook of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no participants survived the channel threshold this round")]
    NoParticipants,
    #[error("device {device} has an exactly zero first-antenna gain; exclude it via the fade threshold")]
    ZeroChannelGain { device: usize },
    #[error("detector state became non-finite at iteration {iter}; try a larger damping factor")]
    Diverged { iter: usize },
    #[error("no active devices detected")]
    NoActiveDevices,
    #[error("NMSE undefined: ground-truth blocks are all zero")]
    AllZeroTruth,
    #[error("device shard is empty")]
    EmptyShard,
    #[error("dataset too small: {reason}")]
    DatasetTooSmall { reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
