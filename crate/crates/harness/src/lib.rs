//! Experiment machinery: a deterministic training loop with early stopping,
//! exact-match evaluation, the exhaustive n-in-n census, and
//! sample-efficiency sweeps.

pub mod census;
pub mod eval;
pub mod sweep;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Tensor(#[from] tprlab_tensor::TensorError),

    #[error(transparent)]
    Model(#[from] tprlab_models::ModelError),

    #[error(transparent)]
    Task(#[from] tprlab_tasks::TaskError),

    #[error("empty data set")]
    EmptyData,

    #[error("inputs/targets length mismatch: {0} vs {1}")]
    DataMismatch(usize, usize),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Digit sequences use token id = digit value, so conversion is a cast.
pub fn digit_ids(seq: &[u8]) -> Vec<usize> {
    seq.iter().map(|&d| d as usize).collect()
}
