//! Dense tensors with reverse-mode automatic differentiation.
//!
//! The crate is organised around a define-by-run tape: every operation
//! appends a node to a [`Graph`], forward values are computed eagerly, and
//! [`Graph::backward`] walks the tape in reverse to accumulate gradients.
//! Tensors are generic over [`Scalar`] so the same code runs in `f64`
//! (verification, byte-exact reproduction) and `f32` (training speed).

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::TensorError;
pub use graph::{Graph, Var};
pub use optim::{Optimizer, OptimizerConfig};
pub use params::{ParamId, ParamSet, Parameter};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, TensorError>;
