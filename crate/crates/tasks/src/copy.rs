//! The digit-copying task with n-in-n withholding.
//!
//! A length-5 digit sequence is *n-in-n* when some position p (1-based)
//! holds the digit value p. All n-in-n sequences are withheld from training;
//! copying them correctly afterwards requires composing position and content
//! in combinations never seen together.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Result, TaskError};

pub const SEQ_LEN: usize = 5;
pub const DEFAULT_ALPHABET: usize = 10;

pub type Digits = [u8; SEQ_LEN];

/// True plus the number of positions p (1-based) holding digit value p.
pub fn is_n_in_n(seq: &[u8], alphabet: usize) -> Result<(bool, usize)> {
    if seq.len() != SEQ_LEN {
        return Err(TaskError::WrongLength {
            expected: SEQ_LEN,
            got: seq.len(),
        });
    }
    if !(6..=10).contains(&alphabet) {
        return Err(TaskError::BadAlphabet(alphabet));
    }
    let mut count = 0usize;
    for (i, &d) in seq.iter().enumerate() {
        if d as usize >= alphabet {
            return Err(TaskError::DigitOutOfRange(d, alphabet));
        }
        if d as usize == i + 1 {
            count += 1;
        }
    }
    Ok((count > 0, count))
}

/// All `alphabet^5` sequences in lexicographic order.
pub fn all_sequences(alphabet: usize) -> Vec<Digits> {
    let total = alphabet.pow(SEQ_LEN as u32);
    let mut out = Vec::with_capacity(total);
    for mut n in 0..total {
        let mut d = [0u8; SEQ_LEN];
        for i in (0..SEQ_LEN).rev() {
            d[i] = (n % alphabet) as u8;
            n /= alphabet;
        }
        out.push(d);
    }
    out
}

/// Train/test material for one seed. `nin_test` holds *all* n-in-n
/// sequences, sorted by (n-in-n count, lexicographic) so the five strata are
/// contiguous; `id_test` holds every non-n-in-n sequence not used for
/// training.
#[derive(Clone, Debug)]
pub struct CopySplit {
    pub alphabet: usize,
    pub seed: u64,
    pub policy: String,
    pub train: Vec<Digits>,
    pub id_test: Vec<Digits>,
    pub nin_test: Vec<Digits>,
}

/// Number of non-n-in-n sequences for an alphabet: each of the five
/// positions loses exactly one digit value.
pub fn non_nin_count(alphabet: usize) -> usize {
    (alphabet - 1).pow(SEQ_LEN as u32)
}

/// Samples a training set from the non-n-in-n pool and returns the split.
pub fn gen_copy_splits(alphabet: usize, train_size: usize, seed: u64) -> Result<CopySplit> {
    if !(6..=10).contains(&alphabet) {
        return Err(TaskError::BadAlphabet(alphabet));
    }
    let mut pool = Vec::with_capacity(non_nin_count(alphabet));
    let mut nin = Vec::new();
    for seq in all_sequences(alphabet) {
        let (flag, count) = is_n_in_n(&seq, alphabet)?;
        if flag {
            nin.push((count, seq));
        } else {
            pool.push(seq);
        }
    }
    if train_size > pool.len() {
        return Err(TaskError::TrainSizeTooLarge {
            requested: train_size,
            available: pool.len(),
        });
    }
    nin.sort(); // by count, then lexicographic — already lex within a count
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_7079_u64); // "copy" tag
    pool.shuffle(&mut rng);
    let id_test = pool.split_off(train_size);
    Ok(CopySplit {
        alphabet,
        seed,
        policy: "withhold-n-in-n".to_string(),
        train: pool,
        id_test,
        nin_test: nin.into_iter().map(|(_, s)| s).collect(),
    })
}

/// Every n-in-n sequence, sorted by (n-in-n count, lexicographic) so the
/// five strata are contiguous — the same order `CopySplit::nin_test` uses.
pub fn nin_sequences(alphabet: usize) -> Result<Vec<Digits>> {
    if !(6..=10).contains(&alphabet) {
        return Err(TaskError::BadAlphabet(alphabet));
    }
    let mut nin = Vec::new();
    for seq in all_sequences(alphabet) {
        let (flag, count) = is_n_in_n(&seq, alphabet)?;
        if flag {
            nin.push((count, seq));
        }
    }
    nin.sort();
    Ok(nin.into_iter().map(|(_, s)| s).collect())
}

/// Sizes of the n-in-n strata (count = 1..=5) for an alphabet.
pub fn nin_stratum_sizes(alphabet: usize) -> [usize; SEQ_LEN] {
    let mut sizes = [0usize; SEQ_LEN];
    let a = alphabet;
    // count = c: choose the c matching positions, the rest avoid their digit.
    for c in 1..=SEQ_LEN {
        sizes[c - 1] = binomial(SEQ_LEN, c) * (a - 1).pow((SEQ_LEN - c) as u32);
    }
    sizes
}

fn binomial(n: usize, k: usize) -> usize {
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn quoted_examples() {
        assert_eq!(is_n_in_n(&[3, 9, 7, 4, 7], 10).unwrap(), (true, 1));
        assert_eq!(is_n_in_n(&[1, 2, 3, 4, 5], 10).unwrap(), (true, 5));
        assert_eq!(is_n_in_n(&[2, 1, 1, 1, 1], 10).unwrap(), (false, 0));
        assert!(matches!(
            is_n_in_n(&[1, 2, 3], 10),
            Err(TaskError::WrongLength { expected: 5, got: 3 })
        ));
        assert!(is_n_in_n(&[1, 2, 3, 4, 11], 10).is_err());
    }

    #[test]
    fn brute_force_census_of_the_full_universe() {
        // Complement argument: 10^5 - 9^5 = 40,951 n-in-n sequences.
        let mut nin = 0usize;
        let mut by_count = [0usize; SEQ_LEN];
        for seq in all_sequences(10) {
            let (flag, count) = is_n_in_n(&seq, 10).unwrap();
            if flag {
                nin += 1;
                by_count[count - 1] += 1;
            }
        }
        assert_eq!(nin, 40_951);
        assert_eq!(100_000 - nin, 59_049);
        assert_eq!(by_count, [32_805, 7_290, 810, 45, 1]);
        assert_eq!(nin_stratum_sizes(10), by_count);
        assert_eq!(non_nin_count(10), 59_049);
    }

    #[test]
    fn split_respects_withholding_and_disjointness() {
        let split = gen_copy_splits(10, 2_000, 7).unwrap();
        assert_eq!(split.train.len(), 2_000);
        assert_eq!(split.id_test.len(), 59_049 - 2_000);
        assert_eq!(split.nin_test.len(), 40_951);
        for seq in &split.train {
            assert!(!is_n_in_n(seq, 10).unwrap().0);
        }
        let train: HashSet<_> = split.train.iter().collect();
        assert!(split.id_test.iter().all(|s| !train.contains(s)));
        assert!(split.nin_test.iter().all(|s| !train.contains(s)));
        // Strata are contiguous and ordered by count.
        let counts: Vec<usize> = split
            .nin_test
            .iter()
            .map(|s| is_n_in_n(s, 10).unwrap().1)
            .collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nin_enumeration_matches_the_split() {
        let split = gen_copy_splits(10, 100, 3).unwrap();
        assert_eq!(nin_sequences(10).unwrap(), split.nin_test);
        assert!(nin_sequences(5).is_err());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let a = gen_copy_splits(10, 500, 42).unwrap();
        let b = gen_copy_splits(10, 500, 42).unwrap();
        let c = gen_copy_splits(10, 500, 43).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.id_test, b.id_test);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn oversized_train_request_reports_the_available_count() {
        match gen_copy_splits(10, 60_000, 1) {
            Err(TaskError::TrainSizeTooLarge {
                requested,
                available,
            }) => {
                assert_eq!(requested, 60_000);
                assert_eq!(available, 59_049);
            }
            other => panic!("expected TrainSizeTooLarge, got {other:?}"),
        }
    }
}
