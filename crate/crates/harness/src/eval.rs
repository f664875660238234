//! Greedy-decode evaluation: exact match, length-bucketed batching, and a
//! detector for the characteristic adjacent-swap error.

use std::collections::BTreeMap;

use tprlab_models::SeqModel;
use tprlab_tensor::Scalar;

use crate::{HarnessError, Result};

/// Anything that can greedily decode a rectangular batch. Implemented for
/// trait-object models; test doubles implement it directly so evaluation
/// logic can be exercised without training anything.
pub trait BatchDecoder {
    /// `inputs` must all share one length; outputs come back in order.
    fn decode_batch(&self, inputs: &[Vec<usize>], max_out: usize) -> Result<Vec<Vec<usize>>>;
}

impl<F: Scalar> BatchDecoder for dyn SeqModel<F> + '_ {
    fn decode_batch(&self, inputs: &[Vec<usize>], max_out: usize) -> Result<Vec<Vec<usize>>> {
        self.greedy_decode(inputs, max_out).map_err(Into::into)
    }
}

/// Decodes every input, grouping equal-length inputs into batches of at most
/// `batch` so each call to the decoder is rectangular. Output order matches
/// input order regardless of grouping.
pub fn decode_all<D: BatchDecoder + ?Sized>(
    decoder: &D,
    inputs: &[Vec<usize>],
    max_out: usize,
    batch: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch == 0 {
        return Err(HarnessError::Invalid("batch size must be positive".into()));
    }
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, input) in inputs.iter().enumerate() {
        by_len.entry(input.len()).or_default().push(i);
    }
    let mut out: Vec<Option<Vec<usize>>> = vec![None; inputs.len()];
    for idxs in by_len.values() {
        for chunk in idxs.chunks(batch) {
            let batch_inputs: Vec<Vec<usize>> =
                chunk.iter().map(|&i| inputs[i].clone()).collect();
            let decoded = decoder.decode_batch(&batch_inputs, max_out)?;
            if decoded.len() != chunk.len() {
                return Err(HarnessError::Invalid(format!(
                    "decoder returned {} outputs for {} inputs",
                    decoded.len(),
                    chunk.len()
                )));
            }
            for (&i, d) in chunk.iter().zip(decoded) {
                out[i] = Some(d);
            }
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every index decoded")).collect())
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct EmReport {
    pub total: usize,
    pub matches: usize,
}

impl EmReport {
    pub fn em(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matches as f64 / self.total as f64
        }
    }
}

/// Sequence-level exact match of greedy decodes against targets. Decoding
/// allows one token beyond the longest target so an overshoot counts as a
/// miss rather than being truncated into a spurious hit.
pub fn exact_match_em<D: BatchDecoder + ?Sized>(
    decoder: &D,
    inputs: &[Vec<usize>],
    targets: &[Vec<usize>],
    batch: usize,
) -> Result<EmReport> {
    if inputs.len() != targets.len() {
        return Err(HarnessError::DataMismatch(inputs.len(), targets.len()));
    }
    let max_out = targets.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let outputs = decode_all(decoder, inputs, max_out, batch)?;
    let matches = outputs
        .iter()
        .zip(targets)
        .filter(|(o, t)| o == t)
        .count();
    Ok(EmReport {
        total: targets.len(),
        matches,
    })
}

/// True when `out` is `tgt` with exactly one pair of adjacent, *distinct*
/// tokens swapped — the characteristic near-miss where content survives but
/// two neighbouring positions trade places. Equal neighbours are excluded
/// because swapping them is invisible.
pub fn is_adjacent_transposition(out: &[usize], tgt: &[usize]) -> bool {
    if out.len() != tgt.len() || out == tgt {
        return false;
    }
    let Some(first) = out.iter().zip(tgt).position(|(a, b)| a != b) else {
        return false;
    };
    if first + 1 >= out.len() {
        return false;
    }
    if out[first] != tgt[first + 1] || out[first + 1] != tgt[first] || tgt[first] == tgt[first + 1]
    {
        return false;
    }
    out[first + 2..] == tgt[first + 2..]
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;

    impl BatchDecoder for Echo {
        fn decode_batch(&self, inputs: &[Vec<usize>], _max_out: usize) -> Result<Vec<Vec<usize>>> {
            Ok(inputs.to_vec())
        }
    }

    #[test]
    fn decode_all_restores_input_order_across_length_buckets() {
        let inputs = vec![
            vec![1, 2, 3],
            vec![4],
            vec![5, 6],
            vec![7],
            vec![8, 9, 10],
        ];
        let out = decode_all(&Echo, &inputs, 4, 2).unwrap();
        assert_eq!(out, inputs);
    }

    #[test]
    fn exact_match_counts_only_full_sequence_hits() {
        let inputs = vec![vec![1, 2], vec![3, 4], vec![5]];
        let targets = vec![vec![1, 2], vec![4, 3], vec![5]];
        let r = exact_match_em(&Echo, &inputs, &targets, 8).unwrap();
        assert_eq!((r.total, r.matches), (3, 2));
        assert!((r.em() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn adjacent_transposition_detector() {
        // One adjacent swap of distinct digits is flagged.
        assert!(is_adjacent_transposition(
            &[3, 9, 4, 7, 7],
            &[3, 9, 7, 4, 7]
        ));
        // Identity, non-adjacent swaps, equal-pair swaps, extra edits,
        // and length changes are not.
        assert!(!is_adjacent_transposition(&[1, 2, 3], &[1, 2, 3]));
        assert!(!is_adjacent_transposition(&[3, 2, 1], &[1, 2, 3]));
        assert!(!is_adjacent_transposition(&[1, 1, 2], &[1, 1, 2]));
        assert!(!is_adjacent_transposition(&[2, 1, 4, 3], &[1, 2, 3, 4]));
        assert!(!is_adjacent_transposition(&[2, 1], &[1, 2, 3]));
        // Swap at the very end works too.
        assert!(is_adjacent_transposition(&[1, 3, 2], &[1, 2, 3]));
    }
}
