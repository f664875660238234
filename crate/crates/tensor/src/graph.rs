//! Define-by-run reverse-mode autodiff tape.
//!
//! A [`Graph`] owns a flat arena of nodes. Each operation validates shapes,
//! computes its forward value eagerly, and appends a node recording the
//! operation and its parents. [`Graph::backward`] seeds the (scalar) loss
//! with gradient 1 and walks the arena in reverse id order; because an
//! operation can only reference earlier nodes, a single reverse sweep visits
//! every node exactly once with its output gradient already complete.
//!
//! Non-finite input policy: values entering the graph from outside
//! ([`Graph::leaf`] / [`Graph::constant`]) are always validated, as are the
//! inputs of the numerically sensitive reductions (softmax, layer norm,
//! cross-entropy) and the loss at `backward`. Interior element-wise ops
//! trust their (already validated) producers.

use rand::Rng;

use crate::error::TensorError;
use crate::kernels;
use crate::scalar::Scalar;
use crate::tensor::{strides_for, suffix_repeat, Tensor};
use crate::Result;

/// Handle to a node in a [`Graph`]. Only valid for the graph that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op<F> {
    Leaf,
    /// (m,k) @ (k,n) -> (m,n)
    Matmul { a: usize, b: usize },
    /// (B,m,k) @ (B,k,n) -> (B,m,n)
    Bmm { a: usize, b: usize },
    /// Element-wise sum; `b`'s shape must be a suffix of `a`'s and is
    /// broadcast over the leading axes.
    Add { a: usize, b: usize },
    /// Element-wise product of same-shape tensors.
    Mul { a: usize, b: usize },
    /// Multiplication by a compile-time-known finite constant.
    Scale { a: usize, c: F },
    /// Outer product of two vectors: (m) x (n) -> (m,n).
    Outer { a: usize, b: usize },
    Concat { parts: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize },
    Reshape { a: usize },
    SwapAxes { a: usize, ax1: usize, ax2: usize },
    /// Softmax over the last axis.
    Softmax { a: usize },
    /// Layer norm over the last axis with affine parameters.
    LayerNorm { a: usize, gamma: usize, beta: usize },
    Relu { a: usize },
    Gelu { a: usize },
    Tanh { a: usize },
    Sigmoid { a: usize },
    /// Row lookup: out[..., :] = table[ids[...], :].
    Embed { table: usize, ids: Vec<usize> },
    /// Mean token-level cross entropy from logits (N,V); rows whose target
    /// equals `ignore` contribute nothing.
    CrossEntropy {
        logits: usize,
        targets: Vec<i64>,
        ignore: i64,
    },
    /// Mean of all elements -> scalar.
    Mean { a: usize },
    /// Sum of all elements -> scalar.
    Sum { a: usize },
    /// Mean over one axis, removing it.
    MeanAxis { a: usize, axis: usize },
    /// Inverted-dropout mask applied at forward time (mask kept in `saved`).
    Dropout { a: usize },
}

struct Node<F: Scalar> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
    /// Op-specific forward quantities needed by backward (layer-norm stats,
    /// cross-entropy probabilities, dropout masks).
    saved: Vec<F>,
}

/// Reverse-mode autodiff tape. See module docs.
pub struct Graph<F: Scalar> {
    nodes: Vec<Node<F>>,
    /// Accumulated gradients, parallel to `nodes`. Repeated `backward` calls
    /// keep adding into these until [`Graph::clear_grads`].
    grads: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, v: Var) -> &Node<F> {
        assert!(
            v.0 < self.nodes.len(),
            "Var({}) does not belong to this graph (len {})",
            v.0,
            self.nodes.len()
        );
        &self.nodes[v.0]
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.node(v).value.shape()
    }

    /// Accumulated gradient of a node, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.node(v);
        self.grads[v.0].as_deref()
    }

    /// Drops all accumulated gradients.
    pub fn clear_grads(&mut self) {
        for g in &mut self.grads {
            *g = None;
        }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            saved: Vec::new(),
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn push_saved(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool, saved: Vec<F>) -> Var {
        let v = self.push(value, op, needs_grad);
        self.nodes[v.0].saved = saved;
        v
    }

    fn needs(&self, v: Var) -> bool {
        self.node(v).needs_grad
    }

    // ------------------------------------------------------------------
    // Inputs
    // ------------------------------------------------------------------

    /// Enters a tensor into the graph. Rejects non-finite values.
    pub fn leaf(&mut self, t: Tensor<F>, needs_grad: bool) -> Result<Var> {
        if !t.all_finite() {
            return Err(TensorError::NonFinite("leaf"));
        }
        Ok(self.push(t, Op::Leaf, needs_grad))
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, t: Tensor<F>) -> Result<Var> {
        self.leaf(t, false)
    }

    // ------------------------------------------------------------------
    // Linear algebra
    // ------------------------------------------------------------------

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![F::zero(); m * n];
        kernels::matmul_nn(ta.data(), tb.data(), m, k, n, &mut out);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor::new(vec![m, n], out)?,
            Op::Matmul { a: a.0, b: b.0 },
            needs,
        ))
    }

    /// Batched matrix product of two rank-3 tensors with equal batch size.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(TensorError::ShapeMismatch {
                op: "bmm",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![F::zero(); bs * m * n];
        for i in 0..bs {
            kernels::matmul_nn(
                &ta.data()[i * m * k..(i + 1) * m * k],
                &tb.data()[i * k * n..(i + 1) * k * n],
                m,
                k,
                n,
                &mut out[i * m * n..(i + 1) * m * n],
            );
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor::new(vec![bs, m, n], out)?,
            Op::Bmm { a: a.0, b: b.0 },
            needs,
        ))
    }

    /// Outer product of two vectors.
    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        if ta.rank() != 1 || tb.rank() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "outer",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, n) = (ta.numel(), tb.numel());
        let mut out = Vec::with_capacity(m * n);
        for &av in ta.data() {
            for &bv in tb.data() {
                out.push(av * bv);
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor::new(vec![m, n], out)?,
            Op::Outer { a: a.0, b: b.0 },
            needs,
        ))
    }

    // ------------------------------------------------------------------
    // Element-wise
    // ------------------------------------------------------------------

    /// `a + b` where `b`'s shape is a (broadcast) suffix of `a`'s.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        let Some(repeat) = suffix_repeat(ta.shape(), tb.shape()) else {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        };
        let blen = tb.numel();
        let mut out = Vec::with_capacity(ta.numel());
        for r in 0..repeat {
            let arow = &ta.data()[r * blen..(r + 1) * blen];
            for (x, y) in arow.iter().zip(tb.data()) {
                out.push(*x + *y);
            }
        }
        let shape = ta.shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::Add { a: a.0, b: b.0 }, needs))
    }

    /// Element-wise product of same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a).value, &self.node(b).value);
        if ta.shape() != tb.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let out: Vec<F> = ta.data().iter().zip(tb.data()).map(|(x, y)| *x * *y).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::Mul { a: a.0, b: b.0 }, needs))
    }

    /// Multiplies by a finite constant.
    pub fn scale(&mut self, a: Var, c: F) -> Result<Var> {
        if !c.is_finite() {
            return Err(TensorError::NonFinite("scale"));
        }
        let ta = &self.node(a).value;
        let out: Vec<F> = ta.data().iter().map(|&x| x * c).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Scale { a: a.0, c }, needs))
    }

    /// `a - b` (same broadcast rule as [`Graph::add`]).
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -F::one())?;
        self.add(a, nb)
    }

    // ------------------------------------------------------------------
    // Shape manipulation
    // ------------------------------------------------------------------

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let ta = &self.node(a).value;
        let value = ta.clone().reshaped(shape)?;
        let needs = self.needs(a);
        Ok(self.push(value, Op::Reshape { a: a.0 }, needs))
    }

    /// Swaps two axes (materialises the permuted copy).
    pub fn swap_axes(&mut self, a: Var, ax1: usize, ax2: usize) -> Result<Var> {
        let ta = &self.node(a).value;
        let rank = ta.rank();
        if ax1 >= rank || ax2 >= rank {
            return Err(TensorError::InvalidShape {
                op: "swap_axes",
                shape: ta.shape().to_vec(),
                msg: format!("axes ({ax1},{ax2}) out of range"),
            });
        }
        let (out_shape, strides) = swapped_layout(ta.shape(), ax1, ax2);
        let mut out = Vec::with_capacity(ta.numel());
        permute_gather(ta.data(), &out_shape, &strides, &mut out);
        let needs = self.needs(a);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::SwapAxes { a: a.0, ax1, ax2 },
            needs,
        ))
    }

    /// Transposes the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let rank = self.node(a).value.rank();
        if rank < 2 {
            return Err(TensorError::InvalidShape {
                op: "transpose",
                shape: self.node(a).value.shape().to_vec(),
                msg: "needs rank >= 2".into(),
            });
        }
        self.swap_axes(a, rank - 2, rank - 1)
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArg("concat of zero tensors".into()));
        }
        let first = self.node(parts[0]).value.shape().to_vec();
        if axis >= first.len() {
            return Err(TensorError::InvalidShape {
                op: "concat",
                shape: first,
                msg: format!("axis {axis} out of range"),
            });
        }
        let mut total_axis = 0usize;
        for &p in parts {
            let s = self.node(p).value.shape();
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            total_axis += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = total_axis;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let t = &self.node(p).value;
                let block = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Concat {
                parts: parts.iter().map(|p| p.0).collect(),
                axis,
            },
            needs,
        ))
    }

    /// Takes `len` consecutive entries along `axis`, starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ta = &self.node(a).value;
        let shape = ta.shape();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(TensorError::InvalidShape {
                op: "slice",
                shape: shape.to_vec(),
                msg: format!("axis {axis}, start {start}, len {len}"),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let ext = shape[axis];
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * ext + start) * inner;
            out.extend_from_slice(&ta.data()[base..base + len * inner]);
        }
        let needs = self.needs(a);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Slice { a: a.0, axis, start },
            needs,
        ))
    }

    // ------------------------------------------------------------------
    // Nonlinearities and normalisation
    // ------------------------------------------------------------------

    /// Numerically stable softmax over the last axis. Rejects non-finite input.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = &self.node(a).value;
        if ta.rank() == 0 {
            return Err(TensorError::InvalidShape {
                op: "softmax",
                shape: vec![],
                msg: "needs rank >= 1".into(),
            });
        }
        let row = *ta.shape().last().unwrap();
        // -inf is legal here (masked-out attention positions); NaN and +inf
        // are not: they poison the row's normaliser.
        if ta
            .data()
            .iter()
            .any(|x| x.is_nan() || (x.is_infinite() && x.is_sign_positive()))
        {
            return Err(TensorError::NonFinite("softmax"));
        }
        let mut out = ta.data().to_vec();
        kernels::softmax_rows(&mut out, row);
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Softmax { a: a.0 }, needs))
    }

    /// Layer norm over the last axis with affine parameters (both rank-1 of
    /// the row length). Rejects non-finite input.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: F) -> Result<Var> {
        let ta = &self.node(a).value;
        let row = *ta.shape().last().ok_or_else(|| TensorError::InvalidShape {
            op: "layer_norm",
            shape: vec![],
            msg: "needs rank >= 1".into(),
        })?;
        let (tg, tb) = (&self.node(gamma).value, &self.node(beta).value);
        if tg.shape() != [row] || tb.shape() != [row] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                lhs: ta.shape().to_vec(),
                rhs: tg.shape().to_vec(),
            });
        }
        if !ta.all_finite() {
            return Err(TensorError::NonFinite("layer_norm"));
        }
        let mut out = vec![F::zero(); ta.numel()];
        let mut stats = Vec::with_capacity(2 * ta.numel() / row);
        kernels::layer_norm_rows(ta.data(), tg.data(), tb.data(), row, eps, &mut out, &mut stats);
        let shape = ta.shape().to_vec();
        let needs = self.needs(a) || self.needs(gamma) || self.needs(beta);
        Ok(self.push_saved(
            Tensor::new(shape, out)?,
            Op::LayerNorm {
                a: a.0,
                gamma: gamma.0,
                beta: beta.0,
            },
            needs,
            stats,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let ta = &self.node(a).value;
        let out: Vec<F> = ta.data().iter().map(|&x| x.max(F::zero())).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Relu { a: a.0 }, needs))
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let ta = &self.node(a).value;
        let out: Vec<F> = ta.data().iter().map(|&x| kernels::gelu(x)).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Gelu { a: a.0 }, needs))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let ta = &self.node(a).value;
        let out: Vec<F> = ta.data().iter().map(|&x| x.tanh()).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Tanh { a: a.0 }, needs))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let one = F::one();
        let ta = &self.node(a).value;
        let out: Vec<F> = ta
            .data()
            .iter()
            .map(|&x| one / (one + (-x).exp()))
            .collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Sigmoid { a: a.0 }, needs))
    }

    // ------------------------------------------------------------------
    // Lookup, loss, reductions
    // ------------------------------------------------------------------

    /// Row lookup into a rank-2 `table`: output shape is `ids_shape + [d]`.
    pub fn embed(&mut self, table: Var, ids: &[usize], ids_shape: &[usize]) -> Result<Var> {
        let tt = &self.node(table).value;
        if tt.rank() != 2 {
            return Err(TensorError::InvalidShape {
                op: "embed",
                shape: tt.shape().to_vec(),
                msg: "table must be rank 2".into(),
            });
        }
        let expected: usize = ids_shape.iter().product();
        if expected != ids.len() {
            return Err(TensorError::InvalidArg(format!(
                "embed: ids_shape {:?} does not cover {} ids",
                ids_shape,
                ids.len()
            )));
        }
        let (vocab, d) = (tt.shape()[0], tt.shape()[1]);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(TensorError::InvalidArg(format!(
                    "embed: id {id} out of range for table of {vocab} rows"
                )));
            }
            out.extend_from_slice(&tt.data()[id * d..(id + 1) * d]);
        }
        let mut out_shape = ids_shape.to_vec();
        out_shape.push(d);
        let needs = self.needs(table);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Embed {
                table: table.0,
                ids: ids.to_vec(),
            },
            needs,
        ))
    }

    /// Mean token-level cross entropy from logits (N,V) and integer targets.
    /// Rows whose target equals `ignore` are excluded from the mean. Rejects
    /// non-finite logits.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[i64], ignore: i64) -> Result<Var> {
        let tl = &self.node(logits).value;
        if tl.rank() != 2 {
            return Err(TensorError::InvalidShape {
                op: "cross_entropy",
                shape: tl.shape().to_vec(),
                msg: "logits must be rank 2".into(),
            });
        }
        let (rows, v) = (tl.shape()[0], tl.shape()[1]);
        if targets.len() != rows {
            return Err(TensorError::InvalidArg(format!(
                "cross_entropy: {} targets for {} rows",
                targets.len(),
                rows
            )));
        }
        if !tl.all_finite() {
            return Err(TensorError::NonFinite("cross_entropy"));
        }
        let mut count = 0usize;
        for &t in targets {
            if t == ignore {
                continue;
            }
            if t < 0 || t as usize >= v {
                return Err(TensorError::InvalidArg(format!(
                    "cross_entropy: target {t} out of range for {v} classes"
                )));
            }
            count += 1;
        }
        if count == 0 {
            return Err(TensorError::InvalidArg(
                "cross_entropy: every target is ignored".into(),
            ));
        }
        // probs = softmax(logits); loss = mean over counted rows of -log p[target].
        let mut probs = tl.data().to_vec();
        kernels::softmax_rows(&mut probs, v);
        let mut loss = F::zero();
        for (r, &t) in targets.iter().enumerate() {
            if t == ignore {
                continue;
            }
            loss = loss - probs[r * v + t as usize].ln();
        }
        loss = loss / F::from_f64(count as f64);
        let needs = self.needs(logits);
        Ok(self.push_saved(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: logits.0,
                targets: targets.to_vec(),
                ignore,
            },
            needs,
            probs,
        ))
    }

    /// Mean of all elements.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ta = &self.node(a).value;
        let m = ta.data().iter().cloned().sum::<F>() / F::from_f64(ta.numel() as f64);
        let needs = self.needs(a);
        Ok(self.push(Tensor::scalar(m), Op::Mean { a: a.0 }, needs))
    }

    /// Sum of all elements.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ta = &self.node(a).value;
        let s = ta.data().iter().cloned().sum::<F>();
        let needs = self.needs(a);
        Ok(self.push(Tensor::scalar(s), Op::Sum { a: a.0 }, needs))
    }

    /// Mean over `axis`, removing that axis.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ta = &self.node(a).value;
        let shape = ta.shape();
        if axis >= shape.len() {
            return Err(TensorError::InvalidShape {
                op: "mean_axis",
                shape: shape.to_vec(),
                msg: format!("axis {axis} out of range"),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let ext = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let inv = F::from_f64(1.0 / ext as f64);
        let mut out = vec![F::zero(); outer * inner];
        for o in 0..outer {
            for e in 0..ext {
                let src = &ta.data()[(o * ext + e) * inner..(o * ext + e + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + s;
                }
            }
        }
        for v in &mut out {
            *v = *v * inv;
        }
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        let needs = self.needs(a);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::MeanAxis { a: a.0, axis },
            needs,
        ))
    }

    /// Inverted dropout: each element is zeroed with probability `p`,
    /// survivors are scaled by `1/(1-p)`. Draws from `rng` in element order.
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArg(format!(
                "dropout probability {p} outside [0,1)"
            )));
        }
        let keep = F::from_f64(1.0 / (1.0 - p));
        let ta = &self.node(a).value;
        let mut mask = Vec::with_capacity(ta.numel());
        for _ in 0..ta.numel() {
            mask.push(if rng.gen::<f64>() < p { F::zero() } else { keep });
        }
        let out: Vec<F> = ta.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let shape = ta.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push_saved(Tensor::new(shape, out)?, Op::Dropout { a: a.0 }, needs, mask))
    }

    // ------------------------------------------------------------------
    // Backward
    // ------------------------------------------------------------------

    /// Reverse sweep from a scalar loss. Gradients from repeated calls
    /// accumulate; use [`Graph::clear_grads`] between independent passes.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lt = &self.node(loss).value;
        if lt.numel() != 1 {
            return Err(TensorError::NonScalarLoss(lt.shape().to_vec()));
        }
        if !lt.all_finite() {
            return Err(TensorError::NonFinite("backward"));
        }

        // Local buffers for this pass; merged into persistent grads at the end
        // so repeated backward calls accumulate cleanly.
        let mut local: Vec<Option<Vec<F>>> = vec![None; self.nodes.len()];
        local[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = local[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.accumulate_parents(i, &g, &mut local);
                merge_grad(&mut self.grads[i], &g);
            }
        }
        Ok(())
    }

    /// Routes the output gradient `g` of node `i` to its parents' buffers.
    fn accumulate_parents(&self, i: usize, g: &[F], local: &mut [Option<Vec<F>>]) {
        let node = &self.nodes[i];
        let val = |j: usize| self.nodes[j].value.data();
        let numel = |j: usize| self.nodes[j].value.numel();
        let wants = |j: usize| self.nodes[j].needs_grad;

        match &node.op {
            Op::Leaf => {}

            Op::Matmul { a, b } => {
                let sa = self.nodes[*a].value.shape();
                let (m, k) = (sa[0], sa[1]);
                let n = self.nodes[*b].value.shape()[1];
                if wants(*a) {
                    let da = grad_buf(local, *a, m * k);
                    kernels::matmul_nt(g, val(*b), m, n, k, da);
                }
                if wants(*b) {
                    let db = grad_buf(local, *b, k * self.nodes[*b].value.shape()[1]);
                    kernels::matmul_tn(val(*a), g, m, k, n, db);
                }
            }

            Op::Bmm { a, b } => {
                let sa = self.nodes[*a].value.shape();
                let (bs, m, k) = (sa[0], sa[1], sa[2]);
                let n = self.nodes[*b].value.shape()[2];
                if wants(*a) {
                    let da = grad_buf(local, *a, bs * m * k);
                    for t in 0..bs {
                        kernels::matmul_nt(
                            &g[t * m * n..(t + 1) * m * n],
                            &val(*b)[t * k * n..(t + 1) * k * n],
                            m,
                            n,
                            k,
                            &mut da[t * m * k..(t + 1) * m * k],
                        );
                    }
                }
                if wants(*b) {
                    let db = grad_buf(local, *b, bs * k * n);
                    for t in 0..bs {
                        kernels::matmul_tn(
                            &val(*a)[t * m * k..(t + 1) * m * k],
                            &g[t * m * n..(t + 1) * m * n],
                            m,
                            k,
                            n,
                            &mut db[t * k * n..(t + 1) * k * n],
                        );
                    }
                }
            }

            Op::Add { a, b } => {
                if wants(*a) {
                    let da = grad_buf(local, *a, numel(*a));
                    for (d, &gv) in da.iter_mut().zip(g) {
                        *d = *d + gv;
                    }
                }
                if wants(*b) {
                    let blen = numel(*b);
                    let db = grad_buf(local, *b, blen);
                    for chunk in g.chunks(blen) {
                        for (d, &gv) in db.iter_mut().zip(chunk) {
                            *d = *d + gv;
                        }
                    }
                }
            }

            Op::Mul { a, b } => {
                if wants(*a) {
                    let bv = val(*b);
                    let da = grad_buf(local, *a, numel(*a));
                    for j in 0..da.len() {
                        da[j] = g[j].mul_add(bv[j], da[j]);
                    }
                }
                if wants(*b) {
                    let av = val(*a);
                    let db = grad_buf(local, *b, numel(*b));
                    for j in 0..db.len() {
                        db[j] = g[j].mul_add(av[j], db[j]);
                    }
                }
            }

            Op::Scale { a, c } => {
                if wants(*a) {
                    let da = grad_buf(local, *a, numel(*a));
                    for (d, &gv) in da.iter_mut().zip(g) {
                        *d = gv.mul_add(*c, *d);
                    }
                }
            }

            Op::Outer { a, b } => {
                let (m, n) = (numel(*a), numel(*b));
                if wants(*a) {
                    let bv = val(*b);
                    let da = grad_buf(local, *a, m);
                    for i in 0..m {
                        da[i] = da[i] + kernels::dot(&g[i * n..(i + 1) * n], bv);
                    }
                }
                if wants(*b) {
                    let av = val(*a);
                    let db = grad_buf(local, *b, n);
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for j in 0..n {
                            db[j] = av[i].mul_add(gi[j], db[j]);
                        }
                    }
                }
            }

            Op::Concat { parts, axis } => {
                let out_shape = node.value.shape();
                let outer: usize = out_shape[..*axis].iter().product();
                let inner: usize = out_shape[*axis + 1..].iter().product();
                let total_block: usize = out_shape[*axis] * inner;
                // Per-part (needs grad, block length, offset inside an outer row).
                let mut offset = 0usize;
                let layout: Vec<(usize, usize, bool)> = parts
                    .iter()
                    .map(|&p| {
                        let ext = self.nodes[p].value.shape()[*axis];
                        let entry = (offset, ext * inner, wants(p));
                        offset += ext * inner;
                        entry
                    })
                    .collect();
                for (pi, &p) in parts.iter().enumerate() {
                    let (off, block, w) = layout[pi];
                    if !w {
                        continue;
                    }
                    let dp = grad_buf(local, p, numel(p));
                    for o in 0..outer {
                        let src = &g[o * total_block + off..o * total_block + off + block];
                        let dst = &mut dp[o * block..(o + 1) * block];
                        for (d, &gv) in dst.iter_mut().zip(src) {
                            *d = *d + gv;
                        }
                    }
                }
            }

            Op::Slice { a, axis, start } => {
                if wants(*a) {
                    let src_shape = self.nodes[*a].value.shape().to_vec();
                    let out_shape = node.value.shape();
                    let outer: usize = src_shape[..*axis].iter().product();
                    let inner: usize = src_shape[*axis + 1..].iter().product();
                    let ext = src_shape[*axis];
                    let len = out_shape[*axis];
                    let da = grad_buf(local, *a, numel(*a));
                    for o in 0..outer {
                        let dst_base = (o * ext + start) * inner;
                        let src_base = o * len * inner;
                        for j in 0..len * inner {
                            da[dst_base + j] = da[dst_base + j] + g[src_base + j];
                        }
                    }
                }
            }

            Op::Reshape { a } => {
                if wants(*a) {
                    let da = grad_buf(local, *a, numel(*a));
                    for (d, &gv) in da.iter_mut().zip(g) {
                        *d = *d + gv;
                    }
                }
            }

            Op::SwapAxes { a, ax1, ax2 } => {
                if wants(*a) {
                    let src_shape = self.nodes[*a].value.shape();
                    let (out_shape, strides) = swapped_layout(src_shape, *ax1, *ax2);
                    let da = grad_buf(local, *a, numel(*a));
                    permute_scatter_add(g, &out_shape, &strides, da);
                }
            }

            Op::Softmax { a } => {
                if wants(*a) {
                    let row = *node.value.shape().last().unwrap();
                    let da = grad_buf(local, *a, numel(*a));
                    kernels::softmax_backward_rows(node.value.data(), g, row, da);
                }
            }

            Op::LayerNorm { a, gamma, beta } => {
                let row = *node.value.shape().last().unwrap();
                let x = val(*a);
                let gm = val(*gamma);
                // dgamma/dbeta are cheap; compute into scratch and merge so we
                // can reuse one kernel regardless of which parents need grads.
                let mut dxs = vec![F::zero(); x.len()];
                let mut dgm = vec![F::zero(); row];
                let mut dbt = vec![F::zero(); row];
                kernels::layer_norm_backward_rows(
                    x, gm, g, row, &node.saved, &mut dxs, &mut dgm, &mut dbt,
                );
                if wants(*a) {
                    let da = grad_buf(local, *a, x.len());
                    for (d, &v) in da.iter_mut().zip(&dxs) {
                        *d = *d + v;
                    }
                }
                if wants(*gamma) {
                    let dg = grad_buf(local, *gamma, row);
                    for (d, &v) in dg.iter_mut().zip(&dgm) {
                        *d = *d + v;
                    }
                }
                if wants(*beta) {
                    let db = grad_buf(local, *beta, row);
                    for (d, &v) in db.iter_mut().zip(&dbt) {
                        *d = *d + v;
                    }
                }
            }

            Op::Relu { a } => {
                if wants(*a) {
                    let x = val(*a);
                    let da = grad_buf(local, *a, x.len());
                    for j in 0..x.len() {
                        if x[j] > F::zero() {
                            da[j] = da[j] + g[j];
                        }
                    }
                }
            }

            Op::Gelu { a } => {
                if wants(*a) {
                    let x = val(*a);
                    let da = grad_buf(local, *a, x.len());
                    for j in 0..x.len() {
                        da[j] = g[j].mul_add(kernels::gelu_grad(x[j]), da[j]);
                    }
                }
            }

            Op::Tanh { a } => {
                if wants(*a) {
                    let y = node.value.data();
                    let da = grad_buf(local, *a, y.len());
                    for j in 0..y.len() {
                        da[j] = g[j].mul_add(F::one() - y[j] * y[j], da[j]);
                    }
                }
            }

            Op::Sigmoid { a } => {
                if wants(*a) {
                    let y = node.value.data();
                    let da = grad_buf(local, *a, y.len());
                    for j in 0..y.len() {
                        da[j] = g[j].mul_add(y[j] * (F::one() - y[j]), da[j]);
                    }
                }
            }

            Op::Embed { table, ids } => {
                if wants(*table) {
                    let d = self.nodes[*table].value.shape()[1];
                    let dt = grad_buf(local, *table, numel(*table));
                    for (row, &id) in ids.iter().enumerate() {
                        let src = &g[row * d..(row + 1) * d];
                        let dst = &mut dt[id * d..(id + 1) * d];
                        for (x, &gv) in dst.iter_mut().zip(src) {
                            *x = *x + gv;
                        }
                    }
                }
            }

            Op::CrossEntropy {
                logits,
                targets,
                ignore,
            } => {
                if wants(*logits) {
                    let v = self.nodes[*logits].value.shape()[1];
                    let count = targets.iter().filter(|&&t| t != *ignore).count();
                    let scale = g[0] / F::from_f64(count as f64);
                    let probs = &node.saved;
                    let dl = grad_buf(local, *logits, numel(*logits));
                    for (r, &t) in targets.iter().enumerate() {
                        if t == *ignore {
                            continue;
                        }
                        let row = &mut dl[r * v..(r + 1) * v];
                        let prow = &probs[r * v..(r + 1) * v];
                        for j in 0..v {
                            row[j] = scale.mul_add(prow[j], row[j]);
                        }
                        row[t as usize] = row[t as usize] - scale;
                    }
                }
            }

            Op::Mean { a } => {
                if wants(*a) {
                    let n = numel(*a);
                    let gv = g[0] / F::from_f64(n as f64);
                    let da = grad_buf(local, *a, n);
                    for d in da.iter_mut() {
                        *d = *d + gv;
                    }
                }
            }

            Op::Sum { a } => {
                if wants(*a) {
                    let gv = g[0];
                    let da = grad_buf(local, *a, numel(*a));
                    for d in da.iter_mut() {
                        *d = *d + gv;
                    }
                }
            }

            Op::MeanAxis { a, axis } => {
                if wants(*a) {
                    let shape = self.nodes[*a].value.shape().to_vec();
                    let outer: usize = shape[..*axis].iter().product();
                    let ext = shape[*axis];
                    let inner: usize = shape[*axis + 1..].iter().product();
                    let inv = F::from_f64(1.0 / ext as f64);
                    let da = grad_buf(local, *a, numel(*a));
                    for o in 0..outer {
                        let grow = &g[o * inner..(o + 1) * inner];
                        for e in 0..ext {
                            let dst = &mut da[(o * ext + e) * inner..(o * ext + e + 1) * inner];
                            for (d, &gv) in dst.iter_mut().zip(grow) {
                                *d = gv.mul_add(inv, *d);
                            }
                        }
                    }
                }
            }

            Op::Dropout { a } => {
                if wants(*a) {
                    let mask = &node.saved;
                    let da = grad_buf(local, *a, numel(*a));
                    for j in 0..da.len() {
                        da[j] = g[j].mul_add(mask[j], da[j]);
                    }
                }
            }
        }
    }
}

/// Gets (allocating zeros on first touch) the local gradient buffer of node `j`.
fn grad_buf<F: Scalar>(local: &mut [Option<Vec<F>>], j: usize, len: usize) -> &mut Vec<F> {
    local[j].get_or_insert_with(|| vec![F::zero(); len])
}

fn merge_grad<F: Scalar>(dst: &mut Option<Vec<F>>, src: &[F]) {
    match dst {
        Some(d) => {
            for (x, &y) in d.iter_mut().zip(src) {
                *x = *x + y;
            }
        }
        None => *dst = Some(src.to_vec()),
    }
}

/// Output shape and source strides (in output-axis order) for swapping two axes.
fn swapped_layout(shape: &[usize], ax1: usize, ax2: usize) -> (Vec<usize>, Vec<usize>) {
    let src_strides = strides_for(shape);
    let mut out_shape = shape.to_vec();
    out_shape.swap(ax1, ax2);
    let mut strides = src_strides;
    strides.swap(ax1, ax2);
    (out_shape, strides)
}

/// Walks `out_shape` in row-major order, reading `src` at the given strides.
fn permute_gather<F: Copy>(src: &[F], out_shape: &[usize], strides: &[usize], dst: &mut Vec<F>) {
    let rank = out_shape.len();
    let total: usize = out_shape.iter().product();
    if rank == 0 {
        dst.push(src[0]);
        return;
    }
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..total {
        dst.push(src[off]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
}

/// Inverse of [`permute_gather`]: accumulates `g` (laid out as `out_shape`)
/// back into `dst` at the strided source offsets.
fn permute_scatter_add<F: Scalar>(g: &[F], out_shape: &[usize], strides: &[usize], dst: &mut [F]) {
    let rank = out_shape.len();
    let total: usize = out_shape.iter().product();
    if rank == 0 {
        dst[0] = dst[0] + g[0];
        return;
    }
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for &gv in g.iter().take(total) {
        dst[off] = dst[off] + gv;
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn leaf_rejects_non_finite() {
        let mut g = Graph::<f64>::new();
        assert!(g.leaf(t(&[2], vec![1.0, f64::NAN]), true).is_err());
        assert!(g.leaf(t(&[2], vec![1.0, f64::INFINITY]), false).is_err());
        assert!(g.leaf(t(&[2], vec![1.0, 2.0]), true).is_ok());
    }

    #[test]
    fn matmul_forward_and_backward() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(t(&[2, 3], vec![1., 2., 3., 4., 5., 6.]), true).unwrap();
        let b = g.leaf(t(&[3, 2], vec![7., 8., 9., 10., 11., 12.]), true).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[58., 64., 139., 154.]);
        let loss = g.sum(c).unwrap();
        g.backward(loss).unwrap();
        // d(sum(AB))/dA = ones @ B^T: rows are [7+8, 9+10, 11+12].
        assert_eq!(g.grad(a).unwrap(), &[15., 19., 23., 15., 19., 23.]);
        // d/dB = A^T @ ones: rows are [1+4, 2+5, 3+6] each repeated over columns.
        assert_eq!(g.grad(b).unwrap(), &[5., 5., 7., 7., 9., 9.]);
    }

    #[test]
    fn add_broadcasts_suffix_and_reduces_gradient() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(t(&[2, 3], vec![0.; 6]), true).unwrap();
        let b = g.leaf(t(&[3], vec![1., 2., 3.]), true).unwrap();
        let c = g.add(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[1., 2., 3., 1., 2., 3.]);
        let loss = g.sum(c).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.; 6]);
        assert_eq!(g.grad(b).unwrap(), &[2., 2., 2.]);
    }

    #[test]
    fn swap_axes_round_trip_and_gradient() {
        let mut g = Graph::<f64>::new();
        let data: Vec<f64> = (0..24).map(|x| x as f64).collect();
        let a = g.leaf(t(&[2, 3, 4], data.clone()), true).unwrap();
        let s = g.swap_axes(a, 1, 2).unwrap();
        assert_eq!(g.shape(s), &[2, 4, 3]);
        let back = g.swap_axes(s, 1, 2).unwrap();
        assert_eq!(g.value(back).data(), &data[..]);
        // Gradient of sum through a permutation is all ones.
        let loss = g.sum(s).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.; 24]);
    }

    #[test]
    fn concat_slice_round_trip() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(t(&[2, 2], vec![1., 2., 3., 4.]), true).unwrap();
        let b = g.leaf(t(&[2, 3], vec![5., 6., 7., 8., 9., 10.]), true).unwrap();
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.shape(c), &[2, 5]);
        assert_eq!(g.value(c).data(), &[1., 2., 5., 6., 7., 3., 4., 8., 9., 10.]);
        let sb = g.slice(c, 1, 2, 3).unwrap();
        assert_eq!(g.value(sb).data(), g.value(b).data());
        let loss = g.sum(sb).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[0.; 4]);
        assert_eq!(g.grad(b).unwrap(), &[1.; 6]);
    }

    #[test]
    fn softmax_allows_neg_infinity_masks_but_rejects_nan() {
        let mut g = Graph::<f64>::new();
        // Build -inf via an in-graph scale of a large negative constant is
        // not possible (leaf checks); masking uses large negative finite
        // values instead, but the op itself must tolerate them.
        let a = g
            .leaf(t(&[1, 3], vec![0.0, -1e30, 1.0]), false)
            .unwrap();
        let s = g.softmax(a).unwrap();
        let p = g.value(s).data();
        assert!(p[1] < 1e-300);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_hand_computation() {
        let mut g = Graph::<f64>::new();
        let logits = g
            .leaf(t(&[2, 3], vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]), true)
            .unwrap();
        let loss = g.cross_entropy(logits, &[2, 0], -1).unwrap();
        // Row 0: -log softmax(1,2,3)[2]; row 1: -log(1/3).
        let lse = (1.0f64.exp() + 2.0f64.exp() + 3.0f64.exp()).ln();
        let expect = ((lse - 3.0) + (3.0f64).ln()) / 2.0;
        assert!((g.value(loss).item().unwrap() - expect).abs() < 1e-12);

        g.backward(loss).unwrap();
        let dl = g.grad(logits).unwrap();
        // Gradient rows sum to zero.
        assert!((dl[0] + dl[1] + dl[2]).abs() < 1e-12);
        assert!((dl[3] + dl[4] + dl[5]).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_ignores_marked_rows() {
        let mut g = Graph::<f64>::new();
        let logits = g
            .leaf(t(&[2, 3], vec![1.0, 2.0, 3.0, 9.0, 9.0, 9.0]), true)
            .unwrap();
        let loss = g.cross_entropy(logits, &[2, -1], -1).unwrap();
        let lse = (1.0f64.exp() + 2.0f64.exp() + 3.0f64.exp()).ln();
        assert!((g.value(loss).item().unwrap() - (lse - 3.0)).abs() < 1e-12);
        g.backward(loss).unwrap();
        let dl = g.grad(logits).unwrap();
        assert_eq!(&dl[3..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(t(&[2], vec![3.0, 4.0]), true).unwrap();
        let sq = g.mul(a, a).unwrap();
        let loss = g.sum(sq).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[6.0, 8.0]);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[12.0, 16.0]);
        g.clear_grads();
        assert!(g.grad(a).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(t(&[2], vec![1.0, 2.0]), true).unwrap();
        assert!(matches!(
            g.backward(a),
            Err(TensorError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn embed_looks_up_rows_and_scatters_gradient() {
        let mut g = Graph::<f64>::new();
        let table = g
            .leaf(t(&[3, 2], vec![0., 1., 10., 11., 20., 21.]), true)
            .unwrap();
        let e = g.embed(table, &[2, 0, 2], &[3]).unwrap();
        assert_eq!(g.shape(e), &[3, 2]);
        assert_eq!(g.value(e).data(), &[20., 21., 0., 1., 20., 21.]);
        let loss = g.sum(e).unwrap();
        g.backward(loss).unwrap();
        // Row 2 was used twice.
        assert_eq!(g.grad(table).unwrap(), &[1., 1., 0., 0., 2., 2.]);
    }

    #[test]
    fn mean_axis_forward_backward() {
        let mut g = Graph::<f64>::new();
        let a = g
            .leaf(t(&[2, 2, 2], vec![1., 2., 3., 4., 5., 6., 7., 8.]), true)
            .unwrap();
        let m = g.mean_axis(a, 1).unwrap();
        assert_eq!(g.shape(m), &[2, 2]);
        assert_eq!(g.value(m).data(), &[2., 3., 6., 7.]);
        let loss = g.sum(m).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[0.5; 8]);
    }

    #[test]
    fn dropout_zero_probability_is_identity() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut g = Graph::<f64>::new();
        let a = g.leaf(t(&[4], vec![1., 2., 3., 4.]), true).unwrap();
        let d = g.dropout(a, 0.0, &mut rng).unwrap();
        assert_eq!(g.value(d).data(), &[1., 2., 3., 4.]);
    }
}
