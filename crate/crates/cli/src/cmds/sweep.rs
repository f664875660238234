//! `sweep`: sample-efficiency sweep over training-set sizes on the copy task.
//! Reports, per model kind, the smallest size whose trained model copies the
//! full in-distribution test split exactly.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_harness::{min_size_reaching, sample_efficiency_sweep, SweepConfig, SweepPoint};
use tprlab_models::{build_model, ModelKind, SeqModel};
use tprlab_tensor::Scalar;

use super::common::{
    config_from_value, resolve_out, run_indexed, Global, ModelKnobs, Precision, Task, TrainKnobs,
};
use crate::error::{CliError, Result};
use crate::manifest::{load_config_value, ExperimentManifest};
use crate::table::{fmt_f64, write_table, SWEEP_SUMMARY_V1, SWEEP_V1};

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// JSON config file (or a previous sweep manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated model kinds (default: lstm,transformer,necst).
    #[arg(long)]
    models: Option<String>,
    /// Comma-separated training-set sizes.
    #[arg(long)]
    sizes: Option<String>,
    /// Number of seeds per model kind (seeds 0..n).
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepCmdConfig {
    pub models: Vec<ModelKind>,
    pub sizes: Vec<usize>,
    pub seeds: u64,
    pub alphabet: usize,
    /// Seeds the train/test split, shared by every run in the sweep.
    pub split_seed: u64,
    pub id_eval_cap: Option<usize>,
    pub model: ModelKnobs,
    pub train: TrainKnobs,
}

impl Default for SweepCmdConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            sizes: vec![100, 200, 400, 800, 1600, 3200],
            seeds: 1,
            alphabet: 10,
            split_seed: 0,
            id_eval_cap: Some(2048),
            model: ModelKnobs::default(),
            train: TrainKnobs::default(),
        }
    }
}

pub fn run(global: Global, args: SweepArgs) -> Result<()> {
    match global.precision {
        Precision::F32 => run_typed::<f32>(global, args),
        Precision::F64 => run_typed::<f64>(global, args),
    }
}

fn run_typed<F: Scalar>(global: Global, args: SweepArgs) -> Result<()> {
    let mut cfg: SweepCmdConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "sweep")?)?,
        None => SweepCmdConfig::default(),
    };
    if let Some(models) = &args.models {
        cfg.models = models
            .split(',')
            .map(|m| ModelKind::parse(m.trim()).map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<_>>()?;
    }
    if let Some(sizes) = &args.sizes {
        cfg.sizes = sizes
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::Config(format!("bad size '{s}': {e}")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if let Some(seed) = global.seed {
        cfg.split_seed = seed;
    }
    if cfg.models.is_empty() || cfg.sizes.is_empty() || cfg.seeds == 0 {
        return Err(CliError::Config(
            "sweep needs at least one model kind, one size and one seed".into(),
        ));
    }

    let snapshot = serde_json::json!({"global": global, "command": cfg});
    // The sweep generates its own splits, so the config snapshot is the only
    // input that determines the outputs.
    let pre = ExperimentManifest::new("sweep", snapshot.clone(), Default::default(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;

    let jobs: Vec<(ModelKind, u64)> = cfg
        .models
        .iter()
        .flat_map(|&kind| (0..cfg.seeds).map(move |seed| (kind, seed)))
        .collect();
    let all_points: Vec<(ModelKind, u64, Vec<SweepPoint>)> =
        run_indexed(jobs.len(), global.workers, |i| {
            let (kind, seed) = jobs[i];
            let sweep_cfg = SweepConfig {
                alphabet: cfg.alphabet,
                sizes: cfg.sizes.clone(),
                split_seed: cfg.split_seed,
                train: {
                    let mut t = cfg.train.to_train_config();
                    t.seed = seed;
                    t
                },
                id_eval_cap: cfg.id_eval_cap,
            };
            let vocab_size = cfg.alphabet + 3;
            let mut factory = |_size: usize| -> tprlab_harness::Result<Box<dyn SeqModel<F>>> {
                let mut model_cfg = cfg.model.to_model_config(Task::Copy, vocab_size);
                model_cfg.model_kind = kind;
                model_cfg.seed = seed;
                Ok(build_model::<F>(&model_cfg)?)
            };
            let points = sample_efficiency_sweep(&mut factory, &sweep_cfg)?;
            eprintln!(
                "sweep {}/{}: {} seed {} reached {:?}",
                i + 1,
                jobs.len(),
                kind.as_str(),
                seed,
                min_size_reaching(&points)
            );
            Ok((kind, seed, points))
        })?;

    let mut rows = Vec::new();
    for (kind, seed, points) in &all_points {
        for p in points {
            let matches = (p.id_em * p.id_total as f64).round() as usize;
            rows.push(vec![
                kind.as_str().to_string(),
                p.train_size.to_string(),
                seed.to_string(),
                matches.to_string(),
                p.id_total.to_string(),
                fmt_f64(p.id_em),
                p.reached.to_string(),
            ]);
        }
    }
    write_table(&dir.join("sweep.csv"), SWEEP_V1, &rows)?;

    // A size counts for a kind only when every seed reached full accuracy.
    let mut summary_rows = Vec::new();
    let mut mins: Vec<(ModelKind, Option<usize>)> = Vec::new();
    for &kind in &cfg.models {
        let min = cfg
            .sizes
            .iter()
            .copied()
            .filter(|&size| {
                all_points.iter().filter(|(k, _, _)| *k == kind).all(|(_, _, pts)| {
                    pts.iter().any(|p| p.train_size == size && p.reached)
                })
            })
            .min();
        summary_rows.push(vec![
            kind.as_str().to_string(),
            min.map_or_else(|| "none".to_string(), |m| m.to_string()),
        ]);
        mins.push((kind, min));
    }
    write_table(&dir.join("sweep_summary.csv"), SWEEP_SUMMARY_V1, &summary_rows)?;

    for (kind, min) in &mins {
        match min {
            Some(m) => println!("{}: reaches full id_test accuracy from {} examples", kind.as_str(), m),
            None => println!(
                "{}: never reaches full id_test accuracy at the swept sizes",
                kind.as_str()
            ),
        }
    }
    for (a, ma) in &mins {
        for (b, mb) in &mins {
            if a != b {
                if let (Some(ma), Some(mb)) = (ma, mb) {
                    println!(
                        "size ratio {} / {}: {:.3}",
                        a.as_str(),
                        b.as_str(),
                        *ma as f64 / *mb as f64
                    );
                }
            }
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}
