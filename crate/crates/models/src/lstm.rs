//! Stacked LSTM encoder-decoder baseline.
//!
//! The least structured model of the family: the encoder folds the whole
//! input into per-layer final (h, c) states, the decoder starts from those
//! states and emits tokens one at a time. By default there is no attention
//! at all; an optional dot-product attention over encoder outputs can be
//! enabled with `lstm_attention` (the pooled-decoding pathway is then
//! unavailable, since a pooled vector cannot stand in for the per-token
//! encoder outputs that attention reads).
//!
//! Gates are fused as one (in, 4H) × (H, 4H) pair per layer in [input,
//! forget, cell, output] order; forget-gate biases start at one.

use rand_chacha::ChaCha8Rng;

use tprlab_tensor::scalar::Scalar;
use tprlab_tensor::{rng, Graph, ParamSet, Tensor, Var};

use crate::{
    check_batch, flatten_ids, pad_targets, shift_right, ModelConfig, ModelError, ModelKind,
    ParamVars, Result, SeqModel,
};

pub struct LstmModel<F: Scalar> {
    config: ModelConfig,
    params: ParamSet<F>,
}

type DropRng<'a> = Option<&'a mut ChaCha8Rng>;

/// Graph handles for one encoder pass: per-layer final states and the top
/// layer's per-token outputs (B, L, H).
struct EncStates {
    finals: Vec<(Var, Var)>,
    top_outputs: Var,
}

impl<F: Scalar> LstmModel<F> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.model_kind != ModelKind::Lstm {
            return Err(ModelError::BadConfig(
                "LstmModel requires an lstm config".into(),
            ));
        }
        let params = init_params(&config)?;
        Ok(Self { config, params })
    }

    fn hidden(&self) -> usize {
        self.config.lstm_hidden_size()
    }

    fn maybe_dropout(&self, g: &mut Graph<F>, x: Var, rng: &mut DropRng) -> Result<Var> {
        match rng {
            Some(r) if self.config.dropout > 0.0 => {
                Ok(g.dropout(x, self.config.dropout, &mut **r)?)
            }
            _ => Ok(x),
        }
    }

    /// One LSTM cell step: x (B, in), h and c (B, H) → new (h, c).
    fn cell(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        prefix: &str,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let hsz = self.hidden();
        let wx = pv.get(&self.params, &format!("{prefix}.wx"))?;
        let wh = pv.get(&self.params, &format!("{prefix}.wh"))?;
        let b = pv.get(&self.params, &format!("{prefix}.b"))?;
        let xg = g.matmul(x, wx)?;
        let hg = g.matmul(h, wh)?;
        let gates = g.add(xg, hg)?;
        let gates = g.add(gates, b)?;
        let i = g.slice(gates, 1, 0, hsz)?;
        let f = g.slice(gates, 1, hsz, hsz)?;
        let cc = g.slice(gates, 1, 2 * hsz, hsz)?;
        let o = g.slice(gates, 1, 3 * hsz, hsz)?;
        let i = g.sigmoid(i)?;
        let f = g.sigmoid(f)?;
        let cc = g.tanh(cc)?;
        let o = g.sigmoid(o)?;
        let fc = g.mul(f, c)?;
        let ic = g.mul(i, cc)?;
        let c_new = g.add(fc, ic)?;
        let ct = g.tanh(c_new)?;
        let h_new = g.mul(o, ct)?;
        Ok((h_new, c_new))
    }

    /// Unrolls the stacked encoder over a batch.
    fn encode_graph(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        inputs: &[Vec<usize>],
        rng: &mut DropRng,
    ) -> Result<EncStates> {
        let len = check_batch(&self.config, inputs, self.config.max_len)?;
        let b = inputs.len();
        let hsz = self.hidden();
        let table = pv.get(&self.params, "src_embed")?;
        let ids = flatten_ids(inputs);
        let x = g.embed(table, &ids, &[b, len])?;
        let x = self.maybe_dropout(g, x, rng)?;

        // Per-time-step (B, in) slices for the first layer.
        let mut steps: Vec<Var> = Vec::with_capacity(len);
        for t in 0..len {
            let xt = g.slice(x, 1, t, 1)?;
            steps.push(g.reshape(xt, vec![b, self.config.d_model])?);
        }

        let mut finals = Vec::with_capacity(self.config.n_layers);
        for l in 0..self.config.n_layers {
            if l > 0 {
                for s in steps.iter_mut() {
                    *s = self.maybe_dropout(g, *s, rng)?;
                }
            }
            let prefix = format!("enc.{l}");
            let mut h = g.constant(Tensor::zeros(&[b, hsz]))?;
            let mut c = g.constant(Tensor::zeros(&[b, hsz]))?;
            let mut outs = Vec::with_capacity(len);
            for t in 0..len {
                let (h2, c2) = self.cell(g, pv, &prefix, steps[t], h, c)?;
                h = h2;
                c = c2;
                outs.push(h);
            }
            finals.push((h, c));
            steps = outs;
        }

        // Stack the top layer's outputs back into (B, L, H) for attention.
        let mut rows = Vec::with_capacity(len);
        for &s in &steps {
            rows.push(g.reshape(s, vec![b, 1, hsz])?);
        }
        let top_outputs = g.concat(&rows, 1)?;
        Ok(EncStates {
            finals,
            top_outputs,
        })
    }

    /// One decoder time step over the layer stack; returns per-row logits
    /// (B, V) and updates `states` in place. `enc_outputs` feeds the
    /// optional attention.
    fn decode_step(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        x: Var,
        states: &mut [(Var, Var)],
        enc_outputs: Option<Var>,
        rng: &mut DropRng,
    ) -> Result<Var> {
        let mut xv = x;
        for (l, state) in states.iter_mut().enumerate() {
            if l > 0 {
                xv = self.maybe_dropout(g, xv, rng)?;
            }
            let (h2, c2) = self.cell(g, pv, &format!("dec.{l}"), xv, state.0, state.1)?;
            *state = (h2, c2);
            xv = h2;
        }
        let feature = match enc_outputs {
            Some(enc) => self.attend(g, pv, xv, enc)?,
            None => xv,
        };
        let w = pv.get(&self.params, "out.w")?;
        let bias = pv.get(&self.params, "out.b")?;
        let logits = g.matmul(feature, w)?;
        Ok(g.add(logits, bias)?)
    }

    /// Dot-product attention of the decoder state over encoder outputs:
    /// ctx = softmax(h encᵀ) enc, feature = tanh([h; ctx] Wc + bc).
    fn attend(&self, g: &mut Graph<F>, pv: &ParamVars, h: Var, enc: Var) -> Result<Var> {
        let (b, hsz) = {
            let s = g.shape(enc);
            (s[0], s[2])
        };
        let q = g.reshape(h, vec![b, 1, hsz])?;
        let enc_t = g.swap_axes(enc, 1, 2)?;
        let scores = g.bmm(q, enc_t)?; // (B, 1, L)
        let attn = g.softmax(scores)?;
        let ctx = g.bmm(attn, enc)?; // (B, 1, H)
        let ctx = g.reshape(ctx, vec![b, hsz])?;
        let h = g.reshape(q, vec![b, hsz])?;
        let both = g.concat(&[h, ctx], 1)?; // (B, 2H)
        let wc = pv.get(&self.params, "dec.attn.wc")?;
        let bc = pv.get(&self.params, "dec.attn.bc")?;
        let mixed = g.matmul(both, wc)?;
        let mixed = g.add(mixed, bc)?;
        Ok(g.tanh(mixed)?)
    }

    /// Teacher-forced logits (B, Lt, V) from encoder states.
    fn decode_graph(
        &self,
        g: &mut Graph<F>,
        pv: &ParamVars,
        enc: &EncStates,
        dec_rows: &[Vec<usize>],
        rng: &mut DropRng,
    ) -> Result<Var> {
        let lt = check_batch(&self.config, dec_rows, self.config.max_len)?;
        let b = dec_rows.len();
        let v = self.config.vocab_size;
        let table = pv.get(&self.params, "tgt_embed")?;
        let ids = flatten_ids(dec_rows);
        let y = g.embed(table, &ids, &[b, lt])?;
        let y = self.maybe_dropout(g, y, rng)?;

        let enc_outputs = self.config.lstm_attention.then_some(enc.top_outputs);
        let mut states: Vec<(Var, Var)> = enc.finals.clone();
        let mut slices = Vec::with_capacity(lt);
        for t in 0..lt {
            let yt = g.slice(y, 1, t, 1)?;
            let yt = g.reshape(yt, vec![b, self.config.d_model])?;
            let logits = self.decode_step(g, pv, yt, &mut states, enc_outputs, rng)?;
            slices.push(g.reshape(logits, vec![b, 1, v])?);
        }
        Ok(g.concat(&slices, 1)?)
    }

    /// Greedy decode from plain-tensor decoder states (and encoder outputs
    /// when attention is on), one fresh mini-graph per emitted token.
    fn greedy_from_states(
        &self,
        mut states: Vec<(Tensor<F>, Tensor<F>)>,
        enc_outputs: Option<Tensor<F>>,
        max_out: usize,
    ) -> Result<Vec<Vec<usize>>> {
        let b = states[0].0.shape()[0];
        let mut prev: Vec<usize> = vec![self.config.bos(); b];
        let mut finished = vec![false; b];
        let mut outs: Vec<Vec<usize>> = vec![Vec::new(); b];
        for _ in 0..max_out {
            let mut g = Graph::new();
            let pv = ParamVars::enter(&self.params, &mut g)?;
            let table = pv.get(&self.params, "tgt_embed")?;
            let x = g.embed(table, &prev, &[b])?;
            let mut state_vars: Vec<(Var, Var)> = Vec::with_capacity(states.len());
            for (h, c) in &states {
                let hv = g.constant(h.clone())?;
                let cv = g.constant(c.clone())?;
                state_vars.push((hv, cv));
            }
            let enc_var = match &enc_outputs {
                Some(t) => Some(g.constant(t.clone())?),
                None => None,
            };
            let logits = self.decode_step(&mut g, &pv, x, &mut state_vars, enc_var, &mut None)?;
            let next = crate::argmax_rows(g.value(logits).data(), self.config.vocab_size);
            for (l, (hv, cv)) in state_vars.iter().enumerate() {
                states[l] = (g.value(*hv).clone(), g.value(*cv).clone());
            }
            let mut all_done = true;
            for r in 0..b {
                if finished[r] {
                    prev[r] = self.config.pad();
                    continue;
                }
                if next[r] == self.config.eos() {
                    finished[r] = true;
                    prev[r] = self.config.eos();
                } else {
                    outs[r].push(next[r]);
                    prev[r] = next[r];
                    all_done = false;
                }
            }
            if all_done && finished.iter().all(|&f| f) {
                break;
            }
        }
        Ok(outs)
    }

    /// Runs the encoder and extracts plain tensors: per-layer (h, c) plus
    /// the top-layer outputs.
    fn encode_tensors(
        &self,
        inputs: &[Vec<usize>],
    ) -> Result<(Vec<(Tensor<F>, Tensor<F>)>, Tensor<F>)> {
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut None)?;
        let states = enc
            .finals
            .iter()
            .map(|&(h, c)| (g.value(h).clone(), g.value(c).clone()))
            .collect();
        Ok((states, g.value(enc.top_outputs).clone()))
    }
}

impl<F: Scalar> SeqModel<F> for LstmModel<F> {
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
        let logits = self.decode_graph(&mut g, &pv, &enc, &dec_rows, &mut rng_opt)?;
        let flat = g.reshape(logits, vec![inputs.len() * t_max, self.config.vocab_size])?;
        let flat_targets: Vec<i64> = padded.iter().flatten().map(|&t| t as i64).collect();
        let loss = g.cross_entropy(flat, &flat_targets, self.config.pad() as i64)?;
        let loss_val = g.value(loss).item()?.as_f64();
        g.backward(loss)?;
        self.params.harvest(&g, pv.all());
        Ok(loss_val)
    }

    fn greedy_decode(&self, inputs: &[Vec<usize>], max_out: usize) -> Result<Vec<Vec<usize>>> {
        let (states, top) = self.encode_tensors(inputs)?;
        let enc_outputs = self.config.lstm_attention.then_some(top);
        self.greedy_from_states(states, enc_outputs, max_out)
    }

    fn encode_pooled(&self, inputs: &[Vec<usize>]) -> Result<Tensor<F>> {
        let mut g = Graph::new();
        let pv = ParamVars::enter(&self.params, &mut g)?;
        let enc = self.encode_graph(&mut g, &pv, inputs, &mut None)?;
        // Layout: layer 0 h, layer 0 c, layer 1 h, layer 1 c, …
        let parts: Vec<Var> = enc.finals.iter().flat_map(|&(h, c)| [h, c]).collect();
        let pooled = g.concat(&parts, 1)?;
        Ok(g.value(pooled).clone())
    }

    fn pooled_width(&self) -> usize {
        2 * self.config.n_layers * self.hidden()
    }

    fn decode_from_pooled(&self, pooled: &Tensor<F>, max_out: usize) -> Result<Vec<Vec<usize>>> {
        if self.config.lstm_attention {
            return Err(ModelError::BadInput(
                "pooled decoding is unavailable with lstm_attention: the pooled \
                 vector cannot stand in for per-token encoder outputs"
                    .into(),
            ));
        }
        let s = pooled.shape().to_vec();
        if s.len() != 2 || s[1] != self.pooled_width() {
            return Err(ModelError::BadInput(format!(
                "pooled shape {s:?} does not match (batch, {})",
                self.pooled_width()
            )));
        }
        let (b, hsz) = (s[0], self.hidden());
        let mut states = Vec::with_capacity(self.config.n_layers);
        for l in 0..self.config.n_layers {
            let mut h = Vec::with_capacity(b * hsz);
            let mut c = Vec::with_capacity(b * hsz);
            for r in 0..b {
                let row = &pooled.data()[r * s[1]..(r + 1) * s[1]];
                h.extend_from_slice(&row[2 * l * hsz..(2 * l + 1) * hsz]);
                c.extend_from_slice(&row[(2 * l + 1) * hsz..(2 * l + 2) * hsz]);
            }
            states.push((
                Tensor::new(vec![b, hsz], h)?,
                Tensor::new(vec![b, hsz], c)?,
            ));
        }
        self.greedy_from_states(states, None, max_out)
    }
}

// ----------------------------------------------------------------------
// Initialisation
// ----------------------------------------------------------------------

/// Fused-gate bias: zeros except the forget-gate section, which starts at
/// one so memory persists early in training.
fn gate_bias<F: Scalar>(hsz: usize) -> Tensor<F> {
    let mut data = vec![F::zero(); 4 * hsz];
    for x in &mut data[hsz..2 * hsz] {
        *x = F::one();
    }
    Tensor::new(vec![4 * hsz], data).expect("shape matches data by construction")
}

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

fn init_params<F: Scalar>(config: &ModelConfig) -> Result<ParamSet<F>> {
    let seed = config.seed;
    let (v, d) = (config.vocab_size, config.d_model);
    let hsz = config.lstm_hidden_size();
    let mut ps = ParamSet::new();

    for name in ["src_embed", "tgt_embed"] {
        let mut r = rng::stream(seed, name);
        ps.add(name, rng::embedding_normal(&mut r, v, d), true)?;
    }

    for stack in ["enc", "dec"] {
        for l in 0..config.n_layers {
            let input = if l == 0 { d } else { hsz };
            add_glorot(&mut ps, seed, &format!("{stack}.{l}.wx"), input, 4 * hsz)?;
            add_glorot(&mut ps, seed, &format!("{stack}.{l}.wh"), hsz, 4 * hsz)?;
            ps.add(&format!("{stack}.{l}.b"), gate_bias(hsz), true)?;
        }
    }

    if config.lstm_attention {
        add_glorot(&mut ps, seed, "dec.attn.wc", 2 * hsz, hsz)?;
        ps.add("dec.attn.bc", Tensor::zeros(&[hsz]), true)?;
    }

    add_glorot(&mut ps, seed, "out.w", hsz, v)?;
    ps.add("out.b", Tensor::zeros(&[v]), true)?;

    Ok(ps)
}
