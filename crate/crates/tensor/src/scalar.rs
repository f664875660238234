//! Floating-point scalar abstraction.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Element type for tensors: `f32` or `f64`.
///
/// Everything numeric goes through [`num_traits::Float`]; the two conversion
/// methods exist so literals and accumulators can be written in `f64` without
/// `NumCast` unwrap noise at every call site.
pub trait Scalar:
    Float + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Dtype tag written into checkpoints ("f32" or "f64").
    const DTYPE: &'static str;

    /// Bytes per element in checkpoint payloads.
    const BYTES: usize;

    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Appends this value to `out` as little-endian bytes.
    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one value from exactly [`Scalar::BYTES`] little-endian bytes.
    fn from_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    #[inline(always)]
    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte chunk"))
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    #[inline(always)]
    fn from_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
    }
}
