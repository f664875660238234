//! Named parameter storage shared by models and optimizers.

use std::collections::HashMap;

use crate::error::TensorError;
use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

/// Index of a parameter inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// One trainable (or frozen) tensor with its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Parameter<F: Scalar> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Vec<F>,
    pub trainable: bool,
}

/// An ordered collection of uniquely named parameters. Registration order is
/// the canonical order used by optimizers and checkpoints, so it is part of a
/// model's reproducibility contract.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<F: Scalar> {
    params: Vec<Parameter<F>>,
    by_name: HashMap<String, usize>,
}

impl<F: Scalar> ParamSet<F> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Registers a tensor under a unique name.
    pub fn add(&mut self, name: &str, value: Tensor<F>, trainable: bool) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        let grad = vec![F::zero(); value.numel()];
        let id = self.params.len();
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad,
            trainable,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar elements across all parameters.
    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Total number of scalar elements across trainable parameters.
    pub fn trainable_elements(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<F> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<F> {
        &mut self.params[id.0]
    }

    /// Registration index of a named parameter (also its position in the
    /// vars returned by [`ParamSet::enter`]).
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn by_name(&self, name: &str) -> Result<&Parameter<F>> {
        let idx = self
            .by_name
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        Ok(&self.params[*idx])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Result<&mut Parameter<F>> {
        let idx = self
            .by_name
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        Ok(&mut self.params[*idx])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<F>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<F>> {
        self.params.iter_mut()
    }

    /// Enters every parameter into a graph as a leaf (gradient tracking
    /// follows `trainable`). Returns the graph vars in registration order.
    pub fn enter(&self, graph: &mut Graph<F>) -> Result<Vec<Var>> {
        let mut vars = Vec::with_capacity(self.params.len());
        for p in &self.params {
            vars.push(graph.leaf(p.value.clone(), p.trainable)?);
        }
        Ok(vars)
    }

    /// Adds the graph's accumulated gradients (for the vars returned by
    /// [`ParamSet::enter`]) into the parameters' own gradient buffers.
    pub fn harvest(&mut self, graph: &Graph<F>, vars: &[Var]) {
        for (p, &v) in self.params.iter_mut().zip(vars) {
            if let Some(g) = graph.grad(v) {
                for (dst, &src) in p.grad.iter_mut().zip(g) {
                    *dst = *dst + src;
                }
            }
        }
    }

    /// Zeroes every gradient buffer.
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in &mut p.grad {
                *g = F::zero();
            }
        }
    }

    /// Global L2 norm over trainable gradients (used for logging and clipping).
    pub fn grad_norm(&self) -> f64 {
        let mut acc = 0.0f64;
        for p in self.params.iter().filter(|p| p.trainable) {
            for &g in &p.grad {
                let gf = g.as_f64();
                acc += gf * gf;
            }
        }
        acc.sqrt()
    }

    /// Scales every trainable gradient by `factor`.
    pub fn scale_grads(&mut self, factor: F) {
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            for g in &mut p.grad {
                *g = *g * factor;
            }
        }
    }

    /// Element-wise casts the whole set to another precision.
    pub fn cast<G: Scalar>(&self) -> ParamSet<G> {
        let mut out = ParamSet::new();
        for p in &self.params {
            out.add(&p.name, p.value.cast::<G>(), p.trainable)
                .expect("names already unique");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("w", Tensor::zeros(&[2, 2]), true).unwrap();
        assert!(matches!(
            ps.add("w", Tensor::zeros(&[2]), true),
            Err(TensorError::DuplicateParam(_))
        ));
        assert!(matches!(
            ps.by_name("missing"),
            Err(TensorError::UnknownParam(_))
        ));
    }

    #[test]
    fn enter_and_harvest_accumulate_gradients() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("w", Tensor::from_vec(vec![2.0, 3.0]), true).unwrap();
        for _ in 0..2 {
            let mut g = Graph::new();
            let vars = ps.enter(&mut g).unwrap();
            let sq = g.mul(vars[0], vars[0]).unwrap();
            let loss = g.sum(sq).unwrap();
            g.backward(loss).unwrap();
            ps.harvest(&g, &vars);
        }
        // Two passes of d(w^2)/dw = 2w.
        assert_eq!(ps.by_name("w").unwrap().grad, vec![8.0, 12.0]);
        ps.zero_grads();
        assert_eq!(ps.by_name("w").unwrap().grad, vec![0.0, 0.0]);
    }

    #[test]
    fn frozen_parameters_receive_no_gradient() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("w", Tensor::from_vec(vec![2.0]), true).unwrap();
        ps.add("frozen", Tensor::from_vec(vec![5.0]), false).unwrap();
        let mut g = Graph::new();
        let vars = ps.enter(&mut g).unwrap();
        let prod = g.mul(vars[0], vars[1]).unwrap();
        let loss = g.sum(prod).unwrap();
        g.backward(loss).unwrap();
        ps.harvest(&g, &vars);
        assert_eq!(ps.by_name("w").unwrap().grad, vec![5.0]);
        assert_eq!(ps.by_name("frozen").unwrap().grad, vec![0.0]);
    }
}
