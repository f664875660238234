//! Pre-norm transformer encoder-decoder, with an optional role binding
//! inside every attention block.
//!
//! In the role-binding variant ([`ModelKind::Necst`]), each attention block
//! additionally projects its query-side token states into per-head *role*
//! vectors, and multiplies each head's context (the attention-weighted sum
//! of values — the *filler*) element-wise by the corresponding role before
//! the heads are merged. This is a Hadamard-compressed tensor-product
//! binding of filler and role. With the role projection forced to all-ones
//! output the variant computes bit-for-bit the plain transformer's function;
//! [`TransformerModel::force_identity_roles`] installs exactly that setting.
//!
//! Shared parameters are initialised from per-name random streams keyed only
//! by `(seed, name)`, so a plain and a role-binding model built from the
//! same seed agree on every weight they have in common.

use rand_chacha::ChaCha8Rng;

use tprlab_tensor::scalar::Scalar;
use tprlab_tensor::{rng, Graph, ParamSet, Tensor, Var};

use crate::{
    check_batch, finalize_decoded, flatten_ids, ln_eps, pad_targets, shift_right, sinusoidal_pe,
    EncTrace, ModelConfig, ModelError, ModelKind, ParamVars, PosEncoding, Pooling, Result,
    SeqModel,
};

pub struct TransformerModel<F: Scalar> {
    config: ModelConfig,
    params: ParamSet<F>,
    use_roles: bool,
}

/// Graph handles produced by one encoder pass.
struct EncOut {
    memory: Var,
    layers: Vec<Var>,
    roles: Vec<Var>,
}

type DropRng<'a> = Option<&'a mut ChaCha8Rng>;

impl<F: Scalar> TransformerModel<F> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let use_roles = match config.model_kind {
            ModelKind::Transformer => false,
            ModelKind::Necst => true,
            ModelKind::Lstm => {
                return Err(ModelError::BadConfig(
                    "TransformerModel cannot be built from an lstm config".into(),
                ))
            }
        };
        let params = init_params(&config, use_roles)?;
        Ok(Self {
            config,
            params,
            use_roles,
        })
    }

    /// Overwrites every role projection with weights 0 and bias 1, so each
    /// role vector is exactly all-ones and the model computes the plain
    /// transformer's function bit-for-bit. No-op on the plain variant.
    pub fn force_identity_roles(&mut self) {
        for p in self.params.iter_mut() {
            if p.name.ends_with(".wr") {
                p.value = Tensor::zeros(p.value.shape());
            } else if p.name.ends_with(".br") {
                p.value = Tensor::full(p.value.shape(), F::one());
            }
        }
    }

    /// Encoder internals for one batch: per-layer residual-stream outputs,
    /// per-attention role tensors shaped (batch·heads, tokens, head_dim)
    /// in layer order (empty for the plain variant), and the final memory.
    pub fn encode_trace(&self, inputs: &[Vec<usize>]) -> Result<EncTrace<F>> {
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut None)?;
        Ok(EncTrace {
            layer_outputs: enc.layers.iter().map(|&v| g.value(v).clone()).collect(),
            roles: enc.roles.iter().map(|&v| g.value(v).clone()).collect(),
            memory: g.value(enc.memory).clone(),
        })
    }

    /// Teacher-forced logits of shape (batch, target_len + 1, vocab), with
    /// no dropout and no gradient side effects.
    pub fn teacher_logits(
        &self,
        inputs: &[Vec<usize>],
        targets: &[Vec<usize>],
    ) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut None)?;
        let (padded, _) = pad_targets(&self.config, targets);
        let dec_rows = shift_right(&self.config, &padded);
        let logits = self.decode_graph(&mut g, &pv, enc.memory, &dec_rows, &mut None)?;
        Ok(g.value(logits).clone())
    }

    // ------------------------------------------------------------------
    // Graph construction
    // ------------------------------------------------------------------

    fn maybe_dropout(&self, g: &mut Graph<F>, x: Var, rng: &mut DropRng) -> Result<Var> {
        match rng {
            Some(r) if self.config.dropout > 0.0 => {
                Ok(g.dropout(x, self.config.dropout, &mut **r)?)
            }
            _ => Ok(x),
        }
    }

    fn layer_norm(&self, g: &mut Graph<F>, pv: &ParamVars, x: Var, prefix: &str) -> Result<Var> {
        let gamma = pv.get(&self.params, &format!("{prefix}.gamma"))?;
        let beta = pv.get(&self.params, &format!("{prefix}.beta"))?;
        Ok(g.layer_norm(x, gamma, beta, ln_eps::<F>())?)
    }

    /// (B, L, Din) × (Din, Dout) + bias → (B, L, Dout).
    fn linear(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        x: Var,
        w_name: &str,
        b_name: &str,
    ) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let w = pv.get(&self.params, w_name)?;
        let bias = pv.get(&self.params, b_name)?;
        let dout = g.shape(w)[1];
        let flat = g.reshape(x, vec![s[0] * s[1], s[2]])?;
        let y = g.matmul(flat, w)?;
        let y = g.add(y, bias)?;
        Ok(g.reshape(y, vec![s[0], s[1], dout])?)
    }

    /// Multi-head scaled dot-product attention. `q_in` is both the query
    /// source and (for the role-binding variant) the role source; `kv_in`
    /// supplies keys and values. Role tensors are appended to `roles`.
    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        prefix: &str,
        q_in: Var,
        kv_in: Var,
        causal: bool,
        rng: &mut DropRng,
        roles: &mut Vec<Var>,
    ) -> Result<Var> {
        let h = self.config.n_heads;
        let k = self.config.d_model / h;
        let (b, lq) = {
            let s = g.shape(q_in);
            (s[0], s[1])
        };
        let lk = g.shape(kv_in)[1];

        let q = self.linear(g, pv, q_in, &format!("{prefix}.wq"), &format!("{prefix}.bq"))?;
        let ky = self.linear(g, pv, kv_in, &format!("{prefix}.wk"), &format!("{prefix}.bk"))?;
        let v = self.linear(g, pv, kv_in, &format!("{prefix}.wv"), &format!("{prefix}.bv"))?;

        let qh = split_heads(g, q, b, lq, h, k)?;
        let kh = split_heads(g, ky, b, lk, h, k)?;
        let vh = split_heads(g, v, b, lk, h, k)?;

        let kt = g.swap_axes(kh, 1, 2)?;
        let scores = g.bmm(qh, kt)?;
        let mut scores = g.scale(scores, F::from_f64(1.0 / (k as f64).sqrt()))?;
        if causal {
            let mask = g.constant(causal_mask::<F>(lq, lk))?;
            scores = g.add(scores, mask)?;
        }
        let attn = g.softmax(scores)?;
        let attn = self.maybe_dropout(g, attn, rng)?;
        let mut ctx = g.bmm(attn, vh)?;

        if self.use_roles {
            let r = self.linear(g, pv, q_in, &format!("{prefix}.wr"), &format!("{prefix}.br"))?;
            let rh = split_heads(g, r, b, lq, h, k)?;
            roles.push(rh);
            ctx = g.mul(ctx, rh)?;
        }

        let merged = merge_heads(g, ctx, b, lq, h, k)?;
        self.linear(g, pv, merged, &format!("{prefix}.wo"), &format!("{prefix}.bo"))
    }

    fn ffn(&self, g: &mut Graph<F>, pv: &ParamVars, x: Var, prefix: &str) -> Result<Var> {
        let h = self.linear(g, pv, x, &format!("{prefix}.ffn.w1"), &format!("{prefix}.ffn.b1"))?;
        let h = g.relu(h)?;
        self.linear(g, pv, h, &format!("{prefix}.ffn.w2"), &format!("{prefix}.ffn.b2"))
    }

    /// Token embedding scaled by √d, plus position encoding, plus dropout.
    fn embed_tokens(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        table_name: &str,
        rows: &[Vec<usize>],
        len: usize,
        rng: &mut DropRng,
    ) -> Result<Var> {
        let b = rows.len();
        let d = self.config.d_model;
        let table = pv.get(&self.params, table_name)?;
        let ids = flatten_ids(rows);
        let x = g.embed(table, &ids, &[b, len])?;
        let x = g.scale(x, F::from_f64((d as f64).sqrt()))?;
        let x = match self.config.pos_encoding {
            PosEncoding::Sinusoidal => {
                let pe = g.constant(sinusoidal_pe::<F>(len, d))?;
                g.add(x, pe)?
            }
            PosEncoding::Learned => {
                let pos = pv.get(&self.params, "pos_embed")?;
                let pe = g.slice(pos, 0, 0, len)?;
                g.add(x, pe)?
            }
            PosEncoding::None => x,
        };
        self.maybe_dropout(g, x, rng)
    }

    fn encode_graph(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        inputs: &[Vec<usize>],
        rng: &mut DropRng,
    ) -> Result<EncOut> {
        let len = check_batch(&self.config, inputs, self.config.max_len)?;
        let mut x = self.embed_tokens(g, pv, "src_embed", inputs, len, rng)?;
        let mut layers = Vec::with_capacity(self.config.n_layers);
        let mut roles = Vec::new();
        for i in 0..self.config.n_layers {
            let p = format!("enc.{i}");
            let h1 = self.layer_norm(g, pv, x, &format!("{p}.ln1"))?;
            let a = self.attention(g, pv, &format!("{p}.attn"), h1, h1, false, rng, &mut roles)?;
            let a = self.maybe_dropout(g, a, rng)?;
            x = g.add(x, a)?;
            let h2 = self.layer_norm(g, pv, x, &format!("{p}.ln2"))?;
            let f = self.ffn(g, pv, h2, &p)?;
            let f = self.maybe_dropout(g, f, rng)?;
            x = g.add(x, f)?;
            layers.push(x);
        }
        let memory = self.layer_norm(g, pv, x, "enc.final_ln")?;
        Ok(EncOut {
            memory,
            layers,
            roles,
        })
    }

    /// Decoder over teacher-forcing rows (already begun with `<s>`):
    /// causal self-attention, cross-attention into `memory`, feed-forward;
    /// returns logits of shape (B, Lt, V).
    fn decode_graph(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        memory: Var,
        dec_rows: &[Vec<usize>],
        rng: &mut DropRng,
    ) -> Result<Var> {
        let len = check_batch(&self.config, dec_rows, self.config.max_len)?;
        let mut y = self.embed_tokens(g, pv, "tgt_embed", dec_rows, len, rng)?;
        let mut roles = Vec::new();
        for i in 0..self.config.n_layers {
            let p = format!("dec.{i}");
            let h1 = self.layer_norm(g, pv, y, &format!("{p}.ln1"))?;
            let a =
                self.attention(g, pv, &format!("{p}.self_attn"), h1, h1, true, rng, &mut roles)?;
            let a = self.maybe_dropout(g, a, rng)?;
            y = g.add(y, a)?;
            let h2 = self.layer_norm(g, pv, y, &format!("{p}.ln2"))?;
            let c = self.attention(
                g,
                pv,
                &format!("{p}.cross_attn"),
                h2,
                memory,
                false,
                rng,
                &mut roles,
            )?;
            let c = self.maybe_dropout(g, c, rng)?;
            y = g.add(y, c)?;
            let h3 = self.layer_norm(g, pv, y, &format!("{p}.ln3"))?;
            let f = self.ffn(g, pv, h3, &p)?;
            let f = self.maybe_dropout(g, f, rng)?;
            y = g.add(y, f)?;
        }
        let y = self.layer_norm(g, pv, y, "dec.final_ln")?;
        self.linear(g, pv, y, "out.w", "out.b")
    }

    fn memory_of(&self, inputs: &[Vec<usize>]) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut None)?;
        Ok(g.value(enc.memory).clone())
    }

    fn greedy_from_memory(&self, memory: &Tensor<F>, max_out: usize) -> Result<Vec<Vec<usize>>> {
        let b = memory.shape()[0];
        let v = self.config.vocab_size;
        let mut prefixes: Vec<Vec<usize>> = vec![vec![self.config.bos()]; b];
        let mut finished = vec![false; b];
        let steps = max_out.min(self.config.max_len - 1);
        for _ in 0..steps {
            let mut g = Graph::new();
            let pv = ParamVars::enter(&self.params, &mut g)?;
            let mem = g.constant(memory.clone())?;
            let logits = self.decode_graph(&mut g, &pv, mem, &prefixes, &mut None)?;
            let lt = prefixes[0].len();
            let data = g.value(logits).data();
            for r in 0..b {
                if finished[r] {
                    prefixes[r].push(self.config.pad());
                    continue;
                }
                let row = &data[(r * lt + lt - 1) * v..(r * lt + lt) * v];
                let next = crate::argmax_rows(row, v)[0];
                prefixes[r].push(next);
                if next == self.config.eos() {
                    finished[r] = true;
                }
            }
            if finished.iter().all(|&f| f) {
                break;
            }
        }
        let rows: Vec<Vec<usize>> = prefixes.into_iter().map(|p| p[1..].to_vec()).collect();
        Ok(finalize_decoded(&self.config, rows))
    }
}

impl<F: Scalar> SeqModel<F> for TransformerModel<F> {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn params(&self) -> &ParamSet<F> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<F> {
        &mut self.params
    }

    fn train_loss(
        &mut self,
        inputs: &[Vec<usize>],
        targets: &[Vec<usize>],
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        if inputs.len() != targets.len() {
            return Err(ModelError::BadInput(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let mut rng_opt: DropRng = Some(rng);
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut rng_opt)?;
        let (padded, t_max) = pad_targets(&self.config, targets);
        let dec_rows = shift_right(&self.config, &padded);
        let logits = self.decode_graph(&mut g, &pv, enc.memory, &dec_rows, &mut rng_opt)?;
        let flat = g.reshape(logits, vec![inputs.len() * t_max, self.config.vocab_size])?;
        let flat_targets: Vec<i64> = padded.iter().flatten().map(|&t| t as i64).collect();
        let loss = g.cross_entropy(flat, &flat_targets, self.config.pad() as i64)?;
        let loss_val = g.value(loss).item()?.as_f64();
        g.backward(loss)?;
        self.params.harvest(&g, pv.all());
        Ok(loss_val)
    }

    fn greedy_decode(&self, inputs: &[Vec<usize>], max_out: usize) -> Result<Vec<Vec<usize>>> {
        let memory = self.memory_of(inputs)?;
        self.greedy_from_memory(&memory, max_out)
    }

    fn encode_pooled(&self, inputs: &[Vec<usize>]) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut None)?;
        let pooled = match self.config.pooling {
            Pooling::Mean => g.mean_axis(enc.memory, 1)?,
            Pooling::Last => {
                let s = g.shape(enc.memory).to_vec();
                let last = g.slice(enc.memory, 1, s[1] - 1, 1)?;
                g.reshape(last, vec![s[0], s[2]])?
            }
        };
        Ok(g.value(pooled).clone())
    }

    fn pooled_width(&self) -> usize {
        self.config.d_model
    }

    fn decode_from_pooled(&self, pooled: &Tensor<F>, max_out: usize) -> Result<Vec<Vec<usize>>> {
        let s = pooled.shape().to_vec();
        if s.len() != 2 || s[1] != self.config.d_model {
            return Err(ModelError::BadInput(format!(
                "pooled shape {s:?} does not match (batch, {})",
                self.config.d_model
            )));
        }
        let memory = pooled.clone().reshaped(vec![s[0], 1, s[1]])?;
        self.greedy_from_memory(&memory, max_out)
    }
}

// ----------------------------------------------------------------------
// Shape shuffles and mask
// ----------------------------------------------------------------------

/// (B, L, H·K) → (B·H, L, K).
fn split_heads<F: Scalar>(
    g: &mut Graph<F>,
    x: Var,
    b: usize,
    l: usize,
    h: usize,
    k: usize,
) -> Result<Var> {
    let x = g.reshape(x, vec![b, l, h, k])?;
    let x = g.swap_axes(x, 1, 2)?;
    Ok(g.reshape(x, vec![b * h, l, k])?)
}

/// (B·H, L, K) → (B, L, H·K).
fn merge_heads<F: Scalar>(
    g: &mut Graph<F>,
    x: Var,
    b: usize,
    l: usize,
    h: usize,
    k: usize,
) -> Result<Var> {
    let x = g.reshape(x, vec![b, h, l, k])?;
    let x = g.swap_axes(x, 1, 2)?;
    Ok(g.reshape(x, vec![b, l, h * k])?)
}

/// Additive causal mask: 0 where key position ≤ query position, a large
/// negative number elsewhere (softmax then assigns those keys zero weight).
fn causal_mask<F: Scalar>(lq: usize, lk: usize) -> Tensor<F> {
    let neg = F::from_f64(-1e30);
    let mut data = Vec::with_capacity(lq * lk);
    for i in 0..lq {
        for j in 0..lk {
            data.push(if j <= i { F::zero() } else { neg });
        }
    }
    Tensor::new(vec![lq, lk], data).expect("shape matches data by construction")
}

// ----------------------------------------------------------------------
// Initialisation
// ----------------------------------------------------------------------

fn add_glorot<F: Scalar>(
    ps: &mut ParamSet<F>,
    seed: u64,
    name: &str,
    fan_in: usize,
    fan_out: usize,
) -> Result<()> {
    let mut r = rng::stream(seed, name);
    ps.add(name, rng::glorot_uniform(&mut r, fan_in, fan_out), true)?;
    Ok(())
}

fn add_embedding<F: Scalar>(
    ps: &mut ParamSet<F>,
    seed: u64,
    name: &str,
    rows: usize,
    dim: usize,
) -> Result<()> {
    let mut r = rng::stream(seed, name);
    ps.add(name, rng::embedding_normal(&mut r, rows, dim), true)?;
    Ok(())
}

fn add_fill<F: Scalar>(ps: &mut ParamSet<F>, name: &str, len: usize, value: F) -> Result<()> {
    ps.add(name, Tensor::full(&[len], value), true)?;
    Ok(())
}

fn add_norm<F: Scalar>(ps: &mut ParamSet<F>, prefix: &str, d: usize) -> Result<()> {
    add_fill(ps, &format!("{prefix}.gamma"), d, F::one())?;
    add_fill(ps, &format!("{prefix}.beta"), d, F::zero())
}

/// One attention block's parameters. The role bias starts at all-ones so
/// the role-binding model begins as a mild perturbation of the plain one.
fn add_attention<F: Scalar>(
    ps: &mut ParamSet<F>,
    seed: u64,
    prefix: &str,
    d: usize,
    use_roles: bool,
) -> Result<()> {
    for part in ["wq", "wk", "wv"] {
        add_glorot(ps, seed, &format!("{prefix}.{part}"), d, d)?;
        add_fill(ps, &format!("{prefix}.b{}", &part[1..]), d, F::zero())?;
    }
    if use_roles {
        add_glorot(ps, seed, &format!("{prefix}.wr"), d, d)?;
        add_fill(ps, &format!("{prefix}.br"), d, F::one())?;
    }
    add_glorot(ps, seed, &format!("{prefix}.wo"), d, d)?;
    add_fill(ps, &format!("{prefix}.bo"), d, F::zero())
}

fn add_ffn<F: Scalar>(ps: &mut ParamSet<F>, seed: u64, prefix: &str, d: usize, f: usize) -> Result<()> {
    add_glorot(ps, seed, &format!("{prefix}.w1"), d, f)?;
    add_fill(ps, &format!("{prefix}.b1"), f, F::zero())?;
    add_glorot(ps, seed, &format!("{prefix}.w2"), f, d)?;
    add_fill(ps, &format!("{prefix}.b2"), d, F::zero())
}

fn init_params<F: Scalar>(config: &ModelConfig, use_roles: bool) -> Result<ParamSet<F>> {
    let seed = config.seed;
    let (v, d, f) = (config.vocab_size, config.d_model, config.d_ff);
    let mut ps = ParamSet::new();

    add_embedding(&mut ps, seed, "src_embed", v, d)?;
    add_embedding(&mut ps, seed, "tgt_embed", v, d)?;
    if config.pos_encoding == PosEncoding::Learned {
        add_embedding(&mut ps, seed, "pos_embed", config.max_len, d)?;
    }

    for i in 0..config.n_layers {
        let p = format!("enc.{i}");
        add_norm(&mut ps, &format!("{p}.ln1"), d)?;
        add_attention(&mut ps, seed, &format!("{p}.attn"), d, use_roles)?;
        add_norm(&mut ps, &format!("{p}.ln2"), d)?;
        add_ffn(&mut ps, seed, &format!("{p}.ffn"), d, f)?;
    }
    add_norm(&mut ps, "enc.final_ln", d)?;

    for i in 0..config.n_layers {
        let p = format!("dec.{i}");
        add_norm(&mut ps, &format!("{p}.ln1"), d)?;
        add_attention(&mut ps, seed, &format!("{p}.self_attn"), d, use_roles)?;
        add_norm(&mut ps, &format!("{p}.ln2"), d)?;
        add_attention(&mut ps, seed, &format!("{p}.cross_attn"), d, use_roles)?;
        add_norm(&mut ps, &format!("{p}.ln3"), d)?;
        add_ffn(&mut ps, seed, &format!("{p}.ffn"), d, f)?;
    }
    add_norm(&mut ps, "dec.final_ln", d)?;

    add_glorot(&mut ps, seed, "out.w", d, v)?;
    add_fill(&mut ps, "out.b", v, F::zero())?;

    Ok(ps)
}
