//! Seeded random streams and parameter initialisation.
//!
//! Every stochastic consumer (init, data shuffling, dropout, …) derives its
//! own named substream from the master seed, so adding a consumer never
//! shifts the draws seen by existing ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// FNV-1a 64-bit hash of a label.
fn fnv1a64(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Master stream for a seed.
pub fn master(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named substream: deterministic in (seed, label), independent across labels.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(label))
}

/// Glorot/Xavier-uniform matrix of shape (fan_in, fan_out): entries drawn
/// from U(-l, l) with l = sqrt(6 / (fan_in + fan_out)). Draws happen in f64
/// and are rounded to `F`, so f32 and f64 models start from the same values.
pub fn glorot_uniform<F: Scalar, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data: Vec<F> = (0..fan_in * fan_out)
        .map(|_| F::from_f64(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data by construction")
}

/// Embedding table of shape (vocab, dim) with entries from N(0, 1/dim).
pub fn embedding_normal<F: Scalar, R: Rng>(rng: &mut R, vocab: usize, dim: usize) -> Tensor<F> {
    let std = (1.0 / dim as f64).sqrt();
    let data: Vec<F> = (0..vocab * dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            F::from_f64(z * std)
        })
        .collect();
    Tensor::new(vec![vocab, dim], data).expect("shape matches data by construction")
}
