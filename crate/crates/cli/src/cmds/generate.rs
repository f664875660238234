//! `generate-data`: writes a dataset split directory with a manifest whose
//! checksums make regeneration verifiable. Same seed, same bytes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_tasks::copy::gen_copy_splits;
use tprlab_tasks::dataset::{write_copy_split, write_robo_split};
use tprlab_tasks::robo::gen_robo_dataset;

use super::common::{config_from_value, resolve_out, Global, Task};
use crate::error::{CliError, Result};
use crate::manifest::{load_config_value, ExperimentManifest};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// JSON config file (or a previous generate-data manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which task to generate.
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Copy task: training sequences to sample.
    #[arg(long)]
    train_size: Option<usize>,
    /// Copy task: digit alphabet size.
    #[arg(long)]
    alphabet: Option<usize>,
    /// Robo task: longest command length to enumerate.
    #[arg(long)]
    max_words: Option<usize>,
    /// Robo task: fraction of the enumeration used for training.
    #[arg(long)]
    train_frac: Option<f64>,
    /// Output directory (default: <output root>/<experiment id>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub task: Task,
    pub seed: u64,
    pub train_size: usize,
    pub alphabet: usize,
    pub max_words: usize,
    pub train_frac: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            task: Task::Copy,
            seed: 0,
            train_size: 1000,
            alphabet: 10,
            max_words: 8,
            train_frac: 0.8,
        }
    }
}

pub fn run(global: Global, args: GenerateArgs) -> Result<()> {
    let mut cfg: GenerateConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "generate-data")?)?,
        None => GenerateConfig::default(),
    };
    if let Some(task) = args.task {
        cfg.task = task;
    }
    if let Some(n) = args.train_size {
        cfg.train_size = n;
    }
    if let Some(a) = args.alphabet {
        cfg.alphabet = a;
    }
    if let Some(w) = args.max_words {
        cfg.max_words = w;
    }
    if let Some(f) = args.train_frac {
        cfg.train_frac = f;
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }

    let snapshot = serde_json::json!({
        "global": global,
        "command": cfg,
    });
    let pre = ExperimentManifest::new("generate-data", snapshot.clone(), BTreeMap::new(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;

    let (dataset_manifest, outputs) = match cfg.task {
        Task::Copy => {
            // A too-large train_size is rejected with the exact count of
            // available sequences (TaskError::TrainSizeTooLarge).
            let split = gen_copy_splits(cfg.alphabet, cfg.train_size, cfg.seed)?;
            let m = write_copy_split(&dir, &split)?;
            (
                m,
                vec![
                    "train.tsv".to_string(),
                    "id_test.tsv".to_string(),
                    "nin_test.tsv".to_string(),
                    "manifest.json".to_string(),
                ],
            )
        }
        Task::Robo => {
            let split = gen_robo_dataset(cfg.seed, cfg.max_words, cfg.train_frac)?;
            let m = write_robo_split(&dir, &split)?;
            (
                m,
                vec![
                    "train.tsv".to_string(),
                    "test.tsv".to_string(),
                    "manifest.json".to_string(),
                ],
            )
        }
    };

    // The dataset manifest carries the per-file checksums; the experiment
    // manifest records them as this run's inputs-for-reproduction.
    let mut checksums = BTreeMap::new();
    for (file, sum) in &dataset_manifest.checksums {
        checksums.insert(file.clone(), sum.clone());
    }
    let mut manifest = ExperimentManifest::new("generate-data", snapshot, checksums, outputs);
    // Dataset dirs double as experiment dirs; their manifest.json is the
    // dataset manifest, so the experiment record goes beside it.
    manifest.outputs.push("experiment.json".to_string());
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("serializing manifest: {e}")))?;
    std::fs::write(dir.join("experiment.json"), text + "\n")
        .map_err(|e| CliError::Io(format!("writing experiment record: {e}")))?;

    let mut count_parts: Vec<String> = dataset_manifest
        .counts
        .iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect();
    count_parts.sort();
    println!(
        "generated {} dataset in {} ({})",
        cfg.task.as_str(),
        dir.display(),
        count_parts.join(", ")
    );
    for (file, sum) in &dataset_manifest.checksums {
        println!("  {file} sha256 {sum}");
    }
    Ok(())
}
