//! Post-hoc analysis of trained sequence models: fitting tensor-product
//! approximations to their pooled encoder states, ranking candidate role
//! schemes by how well the approximation preserves behavior, and editing
//! live encodings by adding and subtracting binding vectors.

pub mod schemes;
pub mod surgery;
pub mod tpdn;

#[cfg(test)]
pub(crate) mod testkit;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Tensor(#[from] tprlab_tensor::TensorError),
    #[error(transparent)]
    Model(#[from] tprlab_models::ModelError),
    #[error(transparent)]
    Task(#[from] tprlab_tasks::TaskError),
    #[error(transparent)]
    Harness(#[from] tprlab_harness::HarnessError),
    #[error("unknown filler symbol '{0}'")]
    UnknownSymbol(String),
    #[error("role id {role} out of range for a scheme with {n_roles} roles")]
    UnknownRole { role: usize, n_roles: usize },
    #[error("sequence of length {len} outside this scheme's range 1..={max_len}")]
    BadLength { len: usize, max_len: usize },
    #[error("fit diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error("could not parse edit script: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

pub use schemes::RoleScheme;
pub use surgery::{apply_edit, edit_experiment, EditScript, EditStep};
pub use tpdn::{
    binding_vector, collect_encodings, collect_encodings_cached, fit_tpdn,
    role_scheme_tournament, substitution_accuracy, TpdnConfig, TpdnFit,
};
