//! Shared fixtures for this crate's tests: planted fits with known tables,
//! random token datasets, and small untrained decoders.

use rand::Rng;
use tprlab_models::{build_model, ModelConfig, ModelKind, SeqModel};
use tprlab_tensor::rng::stream;

use crate::schemes::RoleScheme;
use crate::tpdn::{gaussian_table, TpdnFit};

pub fn token_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

/// A ground-truth approximation with randomly drawn tables: reconstructions
/// from it serve as synthetic fitting targets with a known solution.
pub fn planted_fit(
    tokens: &[String],
    scheme: RoleScheme,
    max_len: usize,
    dim_f: usize,
    dim_r: usize,
    width: usize,
    seed: u64,
) -> TpdnFit<f64> {
    TpdnFit {
        scheme,
        max_len,
        tokens: tokens.to_vec(),
        filler: gaussian_table(tokens.len(), dim_f, 1.0, seed, "plant-filler"),
        role: gaussian_table(scheme.n_roles(max_len), dim_r, 1.0, seed, "plant-role"),
        proj: gaussian_table(
            dim_f * dim_r,
            width,
            1.0 / ((dim_f * dim_r) as f64).sqrt(),
            seed,
            "plant-proj",
        ),
        mse: 0.0,
        history: Vec::new(),
    }
}

pub fn random_inputs(
    n: usize,
    n_tokens: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = stream(seed, "test-inputs");
    (0..n)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            (0..len).map(|_| rng.gen_range(0..n_tokens)).collect()
        })
        .collect()
}

/// A one-layer model at width 16 — untrained, but a perfectly good fixed
/// decoder for substitution checks.
pub fn tiny_decoder(kind: ModelKind, vocab: usize, max_len: usize, seed: u64) -> Box<dyn SeqModel<f64>> {
    let mut mc = ModelConfig::defaults(kind, vocab, max_len);
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_layers = 1;
    mc.d_ff = 32;
    mc.seed = seed;
    build_model::<f64>(&mc).unwrap()
}
