//! Three encoder-decoder sequence models behind one interface.
//!
//! The family forms an ablation ladder of structural binding machinery:
//!
//! * [`ModelKind::Lstm`] — a plain LSTM encoder-decoder (no attention by
//!   default);
//! * [`ModelKind::Transformer`] — a standard pre-norm transformer;
//! * [`ModelKind::Necst`] — the same transformer except every attention
//!   head's output (the *filler*, a weighted sum of other tokens'
//!   encodings) is multiplied element-wise by a learned per-token *role*
//!   vector before the head merge.
//!
//! The transformer and role-binding variants share one code path guarded by
//! a flag, so the role mechanism is a pure ablation: with the role
//! projection forced to produce all-ones vectors, the two are bit-identical.

pub mod check;
pub mod lstm;
pub mod transformer;

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use tprlab_tensor::scalar::Scalar;
use tprlab_tensor::{checkpoint, Graph, ParamSet, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("invalid model config: {0}")]
    BadConfig(String),

    #[error("invalid model input: {0}")]
    BadInput(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Transformer,
    Necst,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Transformer => "transformer",
            ModelKind::Necst => "necst",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "transformer" => Ok(ModelKind::Transformer),
            "necst" => Ok(ModelKind::Necst),
            other => Err(ModelError::BadConfig(format!(
                "unknown model kind '{other}' (expected lstm | transformer | necst)"
            ))),
        }
    }

    pub const ALL: [ModelKind; 3] = [ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosEncoding {
    Sinusoidal,
    Learned,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Mean over final-layer token states.
    Mean,
    /// Final-layer state of the last token.
    Last,
}

/// Configuration shared by all model kinds. Markers follow the vocabulary
/// convention: the last three ids are `<s>`, `</s>`, `<pad>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_kind: ModelKind,
    pub vocab_size: usize,
    pub d_model: usize,
    /// Number of attention heads; for the role-binding model this is also
    /// n_r, the number of role vectors each token generates per layer.
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub pos_encoding: PosEncoding,
    pub pooling: Pooling,
    /// LSTM state width; `None` selects 3·d_model/2, which approximately
    /// matches transformer parameter counts at the default sizes.
    pub lstm_hidden: Option<usize>,
    /// Optional dot-product attention for the LSTM decoder (off by default:
    /// the baseline is deliberately the least structured model).
    pub lstm_attention: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults for a task vocabulary and maximum sequence length.
    pub fn defaults(model_kind: ModelKind, vocab_size: usize, max_len: usize) -> Self {
        Self {
            model_kind,
            vocab_size,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            max_len,
            dropout: 0.0,
            pos_encoding: PosEncoding::Sinusoidal,
            pooling: Pooling::Mean,
            lstm_hidden: None,
            lstm_attention: false,
            seed: 0,
        }
    }

    pub fn bos(&self) -> usize {
        self.vocab_size - 3
    }

    pub fn eos(&self) -> usize {
        self.vocab_size - 2
    }

    pub fn pad(&self) -> usize {
        self.vocab_size - 1
    }

    pub fn lstm_hidden_size(&self) -> usize {
        self.lstm_hidden.unwrap_or(3 * self.d_model / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 4 {
            return Err(ModelError::BadConfig(
                "vocab_size must cover at least one symbol plus three markers".into(),
            ));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 || self.d_ff == 0 {
            return Err(ModelError::BadConfig(
                "d_model, n_heads, n_layers, d_ff must be positive".into(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.max_len < 3 {
            return Err(ModelError::BadConfig(
                "max_len must be at least sequence length + markers".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::BadConfig(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Per-layer encoder internals exposed for analysis and exact-equality
/// checks: the residual-stream output of every layer, and (for the
/// role-binding model) the per-head role vectors, shaped (batch·heads,
/// tokens, head_dim).
pub struct EncTrace<F: Scalar> {
    pub layer_outputs: Vec<Tensor<F>>,
    pub roles: Vec<Tensor<F>>,
    pub memory: Tensor<F>,
}

/// Common interface over the three model kinds. Inputs are batches of
/// equal-length token-id sequences (the harness buckets by length);
/// decoding is greedy argmax with ties broken toward the lowest token id.
pub trait SeqModel<F: Scalar>: Send + Sync {
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamSet<F>;
    fn params_mut(&mut self) -> &mut ParamSet<F>;

    /// Teacher-forced mean cross entropy over a batch; accumulates
    /// parameter gradients. `rng` drives dropout masks.
    fn train_loss(
        &mut self,
        inputs: &[Vec<usize>],
        targets: &[Vec<usize>],
        rng: &mut ChaCha8Rng,
    ) -> Result<f64>;

    /// Greedy decode of a batch; output excludes the end marker. Emission
    /// stops per sequence at the end marker or after `max_out` tokens.
    fn greedy_decode(&self, inputs: &[Vec<usize>], max_out: usize) -> Result<Vec<Vec<usize>>>;

    /// The pooled encoder vector per input, shape (batch, pooled_width).
    fn encode_pooled(&self, inputs: &[Vec<usize>]) -> Result<Tensor<F>>;

    /// Width of [`SeqModel::encode_pooled`] vectors.
    fn pooled_width(&self) -> usize;

    /// Greedy decode driven by pooled encodings alone (the substitution and
    /// surgery pathway).
    fn decode_from_pooled(&self, pooled: &Tensor<F>, max_out: usize) -> Result<Vec<Vec<usize>>>;
}

/// Builds an initialised model of the configured kind.
pub fn build_model<F: Scalar>(config: &ModelConfig) -> Result<Box<dyn SeqModel<F>>> {
    config.validate()?;
    Ok(match config.model_kind {
        ModelKind::Lstm => Box::new(lstm::LstmModel::new(config.clone())?),
        ModelKind::Transformer | ModelKind::Necst => {
            Box::new(transformer::TransformerModel::new(config.clone())?)
        }
    })
}

/// Model card: the JSON value stored in checkpoints and written beside them.
pub fn model_card<F: Scalar>(config: &ModelConfig, params: &ParamSet<F>) -> serde_json::Value {
    serde_json::json!({
        "config": config,
        "param_count": params.total_elements(),
        "trainable_param_count": params.trainable_elements(),
        "dtype": F::DTYPE,
    })
}

/// Saves a model checkpoint with its model card as the config payload.
pub fn save_model<F: Scalar>(path: &Path, model: &dyn SeqModel<F>) -> Result<()> {
    let card = model_card::<F>(model.config(), model.params());
    checkpoint::save(path, &card, model.params())?;
    Ok(())
}

/// Restores a model from a checkpoint written by [`save_model`].
pub fn load_model<F: Scalar>(path: &Path) -> Result<Box<dyn SeqModel<F>>> {
    let (header, loaded) = checkpoint::load::<F>(path)?;
    let config: ModelConfig = serde_json::from_value(
        header
            .model
            .get("config")
            .cloned()
            .ok_or_else(|| ModelError::BadConfig("checkpoint lacks a model card".into()))?,
    )
    .map_err(|e| ModelError::BadConfig(format!("checkpoint model card: {e}")))?;
    let mut model = build_model::<F>(&config)?;
    checkpoint::apply(model.params_mut(), &loaded)?;
    Ok(model)
}

// ----------------------------------------------------------------------
// Shared internals
// ----------------------------------------------------------------------

/// Validates a batch of sequences: non-empty, equal lengths, ids in range.
pub(crate) fn check_batch(
    config: &ModelConfig,
    inputs: &[Vec<usize>],
    budget: usize,
) -> Result<usize> {
    let Some(first) = inputs.first() else {
        return Err(ModelError::BadInput("empty batch".into()));
    };
    let len = first.len();
    if len == 0 {
        return Err(ModelError::BadInput("empty sequence".into()));
    }
    if len > budget {
        return Err(ModelError::BadInput(format!(
            "sequence length {len} exceeds the model's max_len budget {budget}"
        )));
    }
    for seq in inputs {
        if seq.len() != len {
            return Err(ModelError::BadInput(format!(
                "ragged batch: lengths {len} and {} (bucket by length first)",
                seq.len()
            )));
        }
        for &id in seq {
            if id >= config.vocab_size {
                return Err(ModelError::BadInput(format!(
                    "token id {id} out of range for vocab of {}",
                    config.vocab_size
                )));
            }
        }
    }
    Ok(len)
}

/// Right-pads targets with the pad id and appends the end marker:
/// row t = targets[t] ++ [eos] ++ pad…, all rows equally long.
pub(crate) fn pad_targets(config: &ModelConfig, targets: &[Vec<usize>]) -> (Vec<Vec<usize>>, usize) {
    let t_max = targets.iter().map(|t| t.len()).max().unwrap_or(0) + 1;
    let rows = targets
        .iter()
        .map(|t| {
            let mut row = t.clone();
            row.push(config.eos());
            row.resize(t_max, config.pad());
            row
        })
        .collect();
    (rows, t_max)
}

/// Decoder input for teacher forcing: `<s>` followed by the padded target
/// row shifted right by one.
pub(crate) fn shift_right(config: &ModelConfig, padded: &[Vec<usize>]) -> Vec<Vec<usize>> {
    padded
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(row.len());
            out.push(config.bos());
            out.extend_from_slice(&row[..row.len() - 1]);
            out
        })
        .collect()
}

/// Argmax per row with ties broken toward the lowest index.
pub(crate) fn argmax_rows<F: Scalar>(data: &[F], width: usize) -> Vec<usize> {
    data.chunks(width)
        .map(|row| {
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Cuts decoded rows at the first end marker and strips padding.
pub(crate) fn finalize_decoded(config: &ModelConfig, rows: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    rows.into_iter()
        .map(|row| {
            let mut out = Vec::with_capacity(row.len());
            for id in row {
                if id == config.eos() {
                    break;
                }
                out.push(id);
            }
            out
        })
        .collect()
}

/// Flattens a batch of equal-length rows into one id buffer.
pub(crate) fn flatten_ids(rows: &[Vec<usize>]) -> Vec<usize> {
    rows.iter().flatten().copied().collect()
}

/// Layer-norm epsilon sized to the working precision.
pub(crate) fn ln_eps<F: Scalar>() -> F {
    if F::BYTES == 4 {
        F::from_f64(1e-5)
    } else {
        F::from_f64(1e-12)
    }
}

/// Enters all parameters and returns quick name-indexed access.
pub(crate) struct ParamVars {
    vars: Vec<Var>,
}

impl ParamVars {
    pub(crate) fn enter<F: Scalar>(
        params: &ParamSet<F>,
        graph: &mut Graph<F>,
    ) -> std::result::Result<Self, TensorError> {
        Ok(Self {
            vars: params.enter(graph)?,
        })
    }

    pub(crate) fn get<F: Scalar>(
        &self,
        params: &ParamSet<F>,
        name: &str,
    ) -> std::result::Result<Var, TensorError> {
        Ok(self.vars[params.index_of(name)?])
    }

    pub(crate) fn all(&self) -> &[Var] {
        &self.vars
    }
}

/// Sinusoidal position table of shape (len, d): even columns sine, odd
/// columns cosine, wavelengths geometric from 2π to 10000·2π.
pub(crate) fn sinusoidal_pe<F: Scalar>(len: usize, d: usize) -> Tensor<F> {
    let mut data = Vec::with_capacity(len * d);
    for pos in 0..len {
        for j in 0..d {
            let pair = (j / 2) as f64;
            let rate = 1.0 / 10000f64.powf(2.0 * pair / d as f64);
            let angle = pos as f64 * rate;
            let v = if j % 2 == 0 { angle.sin() } else { angle.cos() };
            data.push(F::from_f64(v));
        }
    }
    Tensor::new(vec![len, d], data).expect("shape matches data by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_catches_bad_shapes() {
        let mut c = ModelConfig::defaults(ModelKind::Transformer, 13, 16);
        assert!(c.validate().is_ok());
        c.n_heads = 5;
        assert!(c.validate().is_err());
        c.n_heads = 4;
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn marker_ids_follow_the_vocabulary_convention() {
        let c = ModelConfig::defaults(ModelKind::Lstm, 13, 16);
        assert_eq!((c.bos(), c.eos(), c.pad()), (10, 11, 12));
    }

    #[test]
    fn argmax_breaks_ties_toward_the_lowest_id() {
        assert_eq!(argmax_rows(&[1.0, 3.0, 3.0, 0.0], 4), vec![1]);
        assert_eq!(argmax_rows(&[2.0, 2.0, 1.0, 5.0, 0.0, 5.0], 3), vec![0, 0]);
    }

    #[test]
    fn target_padding_and_shifting() {
        let c = ModelConfig::defaults(ModelKind::Transformer, 13, 16);
        let (padded, t_max) = pad_targets(&c, &[vec![3, 4], vec![7]]);
        assert_eq!(t_max, 3);
        assert_eq!(padded, vec![vec![3, 4, 11], vec![7, 11, 12]]);
        let shifted = shift_right(&c, &padded);
        assert_eq!(shifted, vec![vec![10, 3, 4], vec![10, 7, 11]]);
    }

    #[test]
    fn sinusoidal_table_matches_reference_points() {
        let pe: Tensor<f64> = sinusoidal_pe(4, 6);
        // pos 0: sin(0)=0, cos(0)=1 alternating.
        assert_eq!(&pe.data()[..6], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        // pos 1, dims 0/1: sin(1), cos(1).
        assert!((pe.data()[6] - 1f64.sin()).abs() < 1e-15);
        assert!((pe.data()[7] - 1f64.cos()).abs() < 1e-15);
        // pos 1, dims 2/3: rate 10000^(-2/6).
        let r = 10000f64.powf(-2.0 / 6.0);
        assert!((pe.data()[8] - r.sin()).abs() < 1e-15);
        assert!((pe.data()[9] - r.cos()).abs() < 1e-15);
    }
}
