//! SGD and Adam on a [`ParamSet`].

use serde::{Deserialize, Serialize};

use crate::error::TensorError;
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::Result;

/// Which update rule to run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    #[serde(flatten)]
    pub kind: OptimizerKind,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            kind: OptimizerKind::adam(),
        }
    }
}

/// Optimizer state. Moment buffers are kept in `f64` regardless of the model
/// precision so long training runs do not lose second-moment resolution.
pub struct Optimizer {
    pub config: OptimizerConfig,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            step_count: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update from the gradients currently held by `params`.
    /// Rejects the whole step if any trainable gradient is non-finite, naming
    /// the offending parameter.
    pub fn step<F: Scalar>(&mut self, params: &mut ParamSet<F>) -> Result<()> {
        for p in params.iter().filter(|p| p.trainable) {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(TensorError::NanGradient(p.name.clone()));
            }
        }
        if self.m.len() != params.len() {
            self.m = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
        }
        self.step_count += 1;
        let lr = self.config.lr;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut().filter(|p| p.trainable) {
                    let w = p.value.data_mut();
                    for (wi, &gi) in w.iter_mut().zip(&p.grad) {
                        *wi = *wi - F::from_f64(lr) * gi;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for (idx, p) in params.iter_mut().enumerate() {
                    if !p.trainable {
                        continue;
                    }
                    let m = &mut self.m[idx];
                    let v = &mut self.v[idx];
                    let w = p.value.data_mut();
                    for i in 0..w.len() {
                        let g = p.grad[i].as_f64();
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        let upd = lr * mhat / (vhat.sqrt() + eps);
                        w[i] = w[i] - F::from_f64(upd);
                    }
                }
            }
        }
        Ok(())
    }
}
