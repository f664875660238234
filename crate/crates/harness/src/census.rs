//! The exhaustive n-in-n census: decode every withheld sequence and report
//! exact match overall and per stratum (stratum = how many positions hold
//! their own index).

use serde::{Deserialize, Serialize};
use tprlab_tasks::copy::{is_n_in_n, nin_sequences, SEQ_LEN};

use crate::eval::{decode_all, BatchDecoder};
use crate::{digit_ids, HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct StratumReport {
    pub total: usize,
    pub matches: usize,
}

impl StratumReport {
    pub fn em(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matches as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusReport {
    pub alphabet: usize,
    pub total: usize,
    pub matches: usize,
    /// Indexed by n-in-n count minus one.
    pub strata: [StratumReport; SEQ_LEN],
    /// When the census stops at the first miss, how many sequences were
    /// actually examined; `None` means the census was exhaustive.
    pub aborted_after: Option<usize>,
}

impl CensusReport {
    pub fn em(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matches as f64 / self.total as f64
        }
    }

    pub fn stratum_em(&self) -> [f64; SEQ_LEN] {
        let mut out = [0.0; SEQ_LEN];
        for (o, s) in out.iter_mut().zip(&self.strata) {
            *o = s.em();
        }
        out
    }

    /// Every withheld sequence copied exactly. Only an exhaustive census can
    /// claim this.
    pub fn perfect(&self) -> bool {
        self.aborted_after.is_none() && self.matches == self.total
    }
}

/// Decodes every n-in-n sequence of the alphabet and scores identity copying.
/// With `stop_at_first_miss`, remaining batches are skipped once a miss is
/// seen (useful when only perfection matters); counts then cover only the
/// examined prefix.
pub fn nin_census<D: BatchDecoder + ?Sized>(
    decoder: &D,
    alphabet: usize,
    batch: usize,
    stop_at_first_miss: bool,
) -> Result<CensusReport> {
    if batch == 0 {
        return Err(HarnessError::Invalid("batch size must be positive".into()));
    }
    let seqs = nin_sequences(alphabet)?;
    let mut report = CensusReport {
        alphabet,
        total: seqs.len(),
        matches: 0,
        strata: Default::default(),
        aborted_after: None,
    };
    let mut examined = 0usize;
    let mut missed = false;
    for chunk in seqs.chunks(batch) {
        let inputs: Vec<Vec<usize>> = chunk.iter().map(|s| digit_ids(s)).collect();
        let outputs = decode_all(decoder, &inputs, SEQ_LEN + 1, batch)?;
        for ((seq, input), output) in chunk.iter().zip(&inputs).zip(&outputs) {
            examined += 1;
            let (_, count) = is_n_in_n(seq, alphabet)?;
            let stratum = &mut report.strata[count - 1];
            stratum.total += 1;
            if output == input {
                report.matches += 1;
                stratum.matches += 1;
            } else {
                missed = true;
            }
        }
        if stop_at_first_miss && missed {
            break;
        }
    }
    if examined < seqs.len() {
        report.aborted_after = Some(examined);
        // Totals reflect what was examined, not the full universe.
        report.total = examined;
    } else {
        // Fill in the expected stratum totals even when the decoder was
        // perfect, as a self-check that enumeration covered every stratum.
        debug_assert_eq!(
            report.strata.iter().map(|s| s.total).sum::<usize>(),
            report.total
        );
    }
    Ok(report)
}

/// Per-stratum exact match averaged across several census reports (one per
/// seed, typically). Skips nothing: aborted censuses are rejected because
/// their strata are not comparable.
pub fn mean_stratum_em(reports: &[CensusReport]) -> Result<[f64; SEQ_LEN]> {
    if reports.is_empty() {
        return Err(HarnessError::EmptyData);
    }
    if let Some(r) = reports.iter().find(|r| r.aborted_after.is_some()) {
        return Err(HarnessError::Invalid(format!(
            "census aborted after {} sequences cannot enter a stratum average",
            r.aborted_after.unwrap()
        )));
    }
    let mut out = [0.0; SEQ_LEN];
    for r in reports {
        for (o, em) in out.iter_mut().zip(r.stratum_em()) {
            *o += em;
        }
    }
    for o in &mut out {
        *o /= reports.len() as f64;
    }
    Ok(out)
}

/// True when the sequence never rises by more than `tol`.
pub fn non_increasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_increasing_tolerates_small_rises_only() {
        assert!(non_increasing(&[0.9, 0.7, 0.7, 0.2], 0.0));
        assert!(non_increasing(&[0.9, 0.90001, 0.2], 1e-3));
        assert!(!non_increasing(&[0.5, 0.9], 1e-3));
        assert!(non_increasing(&[], 0.0));
        assert!(non_increasing(&[1.0], 0.0));
    }
}
