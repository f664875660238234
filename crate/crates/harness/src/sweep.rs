//! Sample-efficiency sweeps over training-set size: how much data a model
//! needs before it copies every held-in (non-withheld) sequence perfectly.

use serde::{Deserialize, Serialize};
use tprlab_models::SeqModel;
use tprlab_tasks::copy::gen_copy_splits;
use tprlab_tensor::Scalar;

use crate::eval::exact_match_em;
use crate::train::{train_run, RunRecord, TrainConfig};
use crate::{digit_ids, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub train_size: usize,
    /// Exact match on the in-distribution test split (non-withheld sequences
    /// unseen during training).
    pub id_em: f64,
    pub id_total: usize,
    /// Training succeeded and the in-distribution test was copied perfectly.
    pub reached: bool,
    pub record: RunRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphabet: usize,
    pub sizes: Vec<usize>,
    /// Seeds the train/test split; model seeding belongs to the factory.
    pub split_seed: u64,
    pub train: TrainConfig,
    /// Cap on in-distribution test examples scored per point (the split is
    /// pre-shuffled, so a prefix is a uniform subsample). `None` scores all.
    pub id_eval_cap: Option<usize>,
}

/// Trains a fresh model per size and scores the in-distribution test split.
/// The factory receives the training-set size so callers can log or vary
/// setup, and must return an untrained model each call.
pub fn sample_efficiency_sweep<F: Scalar>(
    make_model: &mut dyn FnMut(usize) -> Result<Box<dyn SeqModel<F>>>,
    cfg: &SweepConfig,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let split = gen_copy_splits(cfg.alphabet, size, cfg.split_seed)?;
        let inputs: Vec<Vec<usize>> = split.train.iter().map(|s| digit_ids(s)).collect();
        let mut model = make_model(size)?;
        let record = train_run(model.as_mut(), &inputs, &inputs, &cfg.train)?;

        let id_take = cfg.id_eval_cap.unwrap_or(split.id_test.len());
        let id_inputs: Vec<Vec<usize>> = split
            .id_test
            .iter()
            .take(id_take)
            .map(|s| digit_ids(s))
            .collect();
        let em = if record.failure.is_some() {
            0.0
        } else {
            exact_match_em(
                model.as_ref(),
                &id_inputs,
                &id_inputs,
                cfg.train.decode_batch,
            )?
            .em()
        };
        points.push(SweepPoint {
            train_size: size,
            id_em: em,
            id_total: id_inputs.len(),
            reached: record.failure.is_none() && em == 1.0,
            record,
        });
    }
    Ok(points)
}

/// Smallest training size whose sweep point reached perfect in-distribution
/// copying.
pub fn min_size_reaching(points: &[SweepPoint]) -> Option<usize> {
    points
        .iter()
        .filter(|p| p.reached)
        .map(|p| p.train_size)
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::RunRecord;

    fn point(train_size: usize, reached: bool) -> SweepPoint {
        SweepPoint {
            train_size,
            id_em: if reached { 1.0 } else { 0.5 },
            id_total: 10,
            reached,
            record: RunRecord {
                model_kind: "test".into(),
                seed: 0,
                train_size,
                steps_run: 1,
                stopped_early: false,
                final_loss: 0.0,
                wall_seconds: 0.0,
                failure: None,
                history: Vec::new(),
            },
        }
    }

    #[test]
    fn min_size_picks_the_smallest_successful_point() {
        let pts = vec![point(4000, true), point(500, false), point(1000, true)];
        assert_eq!(min_size_reaching(&pts), Some(1000));
        assert_eq!(min_size_reaching(&[point(100, false)]), None);
        assert_eq!(min_size_reaching(&[]), None);
    }
}
