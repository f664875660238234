//! Error type shared by all tensor and autodiff operations.

use thiserror::Error;

/// Errors raised by tensor construction, graph operations, optimizers and
/// checkpoints. Shape errors always report the offending shapes so a failure
/// deep inside a model names the actual mismatch.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: lhs {lhs:?} vs rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: invalid shape {shape:?}: {msg}")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        msg: String,
    },

    #[error("{0}: input contains a non-finite value")]
    NonFinite(&'static str),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite gradient on parameter '{0}'")]
    NanGradient(String),

    #[error("duplicate parameter name '{0}'")]
    DuplicateParam(String),

    #[error("unknown parameter '{0}'")]
    UnknownParam(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid argument: {0}")]
    InvalidArg(String),
}
