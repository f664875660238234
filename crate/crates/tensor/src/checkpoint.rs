//! Model checkpoint files.
//!
//! Layout: an 8-byte little-endian `u64` giving the JSON header length, the
//! UTF-8 JSON header itself, then the raw parameter payload — every tensor's
//! elements in registration order, each element little-endian. The header
//! records the dtype, an arbitrary model-config JSON value, and a parameter
//! manifest (name, shape, element offset, trainable flag), so a file can be
//! inspected without knowing the model code.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::TensorError;
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

pub const FORMAT: &str = "tprlab-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset of the first element within the payload, in elements.
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    /// Model-specific configuration, round-tripped verbatim.
    pub model: Value,
    pub params: Vec<ParamEntry>,
}

/// Writes `params` plus a model-config value to `path`.
pub fn save<F: Scalar>(path: &Path, model: &Value, params: &ParamSet<F>) -> Result<()> {
    let mut entries = Vec::with_capacity(params.len());
    let mut offset = 0usize;
    for p in params.iter() {
        entries.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset,
            trainable: p.trainable,
        });
        offset += p.value.numel();
    }
    let header = Header {
        format: FORMAT.to_string(),
        version: VERSION,
        dtype: F::DTYPE.to_string(),
        model: model.clone(),
        params: entries,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| TensorError::Checkpoint(format!("header encode: {e}")))?;

    let mut out = Vec::with_capacity(8 + header_bytes.len() + offset * F::BYTES);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for p in params.iter() {
        for &x in p.value.data() {
            x.write_le(&mut out);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads just the JSON header.
pub fn read_header(path: &Path) -> Result<Header> {
    let bytes = fs::read(path)?;
    let (header, _) = split_header(&bytes)?;
    Ok(header)
}

/// Reads a checkpoint whose dtype must match `F`.
pub fn load<F: Scalar>(path: &Path) -> Result<(Header, ParamSet<F>)> {
    let bytes = fs::read(path)?;
    let (header, payload) = split_header(&bytes)?;
    if header.dtype != F::DTYPE {
        return Err(TensorError::Checkpoint(format!(
            "dtype mismatch: file holds {}, caller expects {}",
            header.dtype,
            F::DTYPE
        )));
    }
    let total: usize = header.params.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    if payload.len() != total * F::BYTES {
        return Err(TensorError::Checkpoint(format!(
            "payload holds {} bytes, manifest expects {}",
            payload.len(),
            total * F::BYTES
        )));
    }
    let mut params = ParamSet::new();
    let mut expect_offset = 0usize;
    for e in &header.params {
        if e.offset != expect_offset {
            return Err(TensorError::Checkpoint(format!(
                "parameter '{}' at offset {}, expected contiguous {}",
                e.name, e.offset, expect_offset
            )));
        }
        let numel: usize = e.shape.iter().product();
        let start = e.offset * F::BYTES;
        let data: Vec<F> = payload[start..start + numel * F::BYTES]
            .chunks_exact(F::BYTES)
            .map(F::from_le)
            .collect();
        params.add(&e.name, Tensor::new(e.shape.clone(), data)?, e.trainable)?;
        expect_offset += numel;
    }
    Ok((header, params))
}

/// Copies values from `src` into `dst` by name; the two sets must hold
/// exactly the same names with the same shapes.
pub fn apply<F: Scalar>(dst: &mut ParamSet<F>, src: &ParamSet<F>) -> Result<()> {
    if dst.len() != src.len() {
        return Err(TensorError::Checkpoint(format!(
            "parameter count mismatch: model has {}, checkpoint has {}",
            dst.len(),
            src.len()
        )));
    }
    let names: Vec<String> = dst.iter().map(|p| p.name.clone()).collect();
    for name in names {
        let loaded = src.by_name(&name).map_err(|_| {
            TensorError::Checkpoint(format!("checkpoint missing parameter '{name}'"))
        })?;
        let value = loaded.value.clone();
        let target = dst.by_name_mut(&name)?;
        if target.value.shape() != value.shape() {
            return Err(TensorError::Checkpoint(format!(
                "parameter '{}': model shape {:?} vs checkpoint shape {:?}",
                name,
                target.value.shape(),
                value.shape()
            )));
        }
        target.value = value;
    }
    Ok(())
}

fn split_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 8 {
        return Err(TensorError::Checkpoint("file shorter than length prefix".into()));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    if bytes.len() < 8 + hlen {
        return Err(TensorError::Checkpoint(format!(
            "header length {} exceeds file size {}",
            hlen,
            bytes.len()
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[8..8 + hlen])
        .map_err(|e| TensorError::Checkpoint(format!("header decode: {e}")))?;
    if header.format != FORMAT {
        return Err(TensorError::Checkpoint(format!(
            "unrecognised format tag '{}'",
            header.format
        )));
    }
    if header.version != VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported version {} (supported: {VERSION})",
            header.version
        )));
    }
    Ok((header, &bytes[8 + hlen..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample_params() -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        ps.add(
            "enc.w",
            Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-300, -7.125]).unwrap(),
            true,
        )
        .unwrap();
        ps.add("enc.b", Tensor::from_vec(vec![0.5, -0.5, 2.0]), true)
            .unwrap();
        ps.add("pos", Tensor::from_vec(vec![9.0]), false).unwrap();
        ps
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ps = sample_params();
        let cfg = json!({"kind": "demo", "d_model": 4});
        save(&path, &cfg, &ps).unwrap();

        let (header, loaded) = load::<f64>(&path).unwrap();
        assert_eq!(header.dtype, "f64");
        assert_eq!(header.model, cfg);
        assert_eq!(loaded.len(), ps.len());
        for (a, b) in ps.iter().zip(loaded.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.trainable, b.trainable);
            assert_eq!(a.value.shape(), b.value.shape());
            for (x, y) in a.value.data().iter().zip(b.value.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        // Saving the loaded set again must reproduce the file byte for byte.
        let path2 = dir.path().join("model2.ckpt");
        save(&path2, &header.model, &loaded).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn dtype_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &json!({}), &sample_params()).unwrap();
        match load::<f32>(&path) {
            Err(TensorError::Checkpoint(msg)) => assert!(msg.contains("dtype")),
            other => panic!("expected dtype error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &json!({}), &sample_params()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load::<f64>(&path),
            Err(TensorError::Checkpoint(_))
        ));
    }

    #[test]
    fn apply_copies_values_by_name() {
        let mut dst = sample_params();
        // Zero out destination values first.
        for p in dst.iter_mut() {
            for v in p.value.data_mut() {
                *v = 0.0;
            }
        }
        let src = sample_params();
        apply(&mut dst, &src).unwrap();
        assert_eq!(
            dst.by_name("enc.w").unwrap().value.data(),
            src.by_name("enc.w").unwrap().value.data()
        );

        // A missing name must fail.
        let mut other = ParamSet::<f64>::new();
        other.add("unrelated", Tensor::from_vec(vec![1.0]), true).unwrap();
        let mut dst2 = sample_params();
        dst2.by_name("enc.w").unwrap();
        assert!(apply(&mut dst2, &other).is_err());
    }
}
