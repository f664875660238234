//! `eval`: exact-match accuracy of a checkpoint on one or more dataset splits.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_harness::exact_match_em;
use tprlab_tensor::Scalar;

use super::common::{config_from_value, load_data, load_model_cli, resolve_out, Global, Precision, Task};
use crate::error::{CliError, Result};
use crate::manifest::{file_sha256, load_config_value, ExperimentManifest};
use crate::table::{fmt_f64, write_table, EVAL_V1};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// JSON config file (or a previous eval manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated split names (default: every split the task defines).
    #[arg(long)]
    splits: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub task: Task,
    pub checkpoint: Option<String>,
    pub data: Option<String>,
    pub splits: Vec<String>,
    pub batch: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            task: Task::Copy,
            checkpoint: None,
            data: None,
            splits: vec![],
            batch: 512,
        }
    }
}

pub fn run(global: Global, args: EvalArgs) -> Result<()> {
    match global.precision {
        Precision::F32 => run_typed::<f32>(global, args),
        Precision::F64 => run_typed::<f64>(global, args),
    }
}

fn run_typed<F: Scalar>(global: Global, args: EvalArgs) -> Result<()> {
    let mut cfg: EvalConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "eval")?)?,
        None => EvalConfig::default(),
    };
    if let Some(task) = args.task {
        cfg.task = task;
    }
    if let Some(ckpt) = &args.checkpoint {
        cfg.checkpoint = Some(ckpt.display().to_string());
    }
    if let Some(data) = &args.data {
        cfg.data = Some(data.display().to_string());
    }
    if let Some(splits) = &args.splits {
        cfg.splits = splits
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    if let Some(batch) = args.batch {
        cfg.batch = batch;
    }
    if cfg.splits.is_empty() {
        cfg.splits = cfg.task.split_names().iter().map(|s| s.to_string()).collect();
    }
    let ckpt_path = PathBuf::from(cfg.checkpoint.clone().ok_or_else(|| {
        CliError::Config("no checkpoint: pass --checkpoint or set \"checkpoint\"".into())
    })?);
    let data_dir = PathBuf::from(cfg.data.clone().ok_or_else(|| {
        CliError::Config("no dataset directory: pass --data or set \"data\"".into())
    })?);

    let data = load_data(cfg.task, &data_dir)?;
    let model = load_model_cli::<F>(&ckpt_path)?;

    let snapshot = serde_json::json!({"global": global, "command": cfg});
    let mut inputs_map = data.checksums.clone();
    inputs_map.insert(
        format!("checkpoint:{}", ckpt_path.display()),
        file_sha256(&ckpt_path)?,
    );
    let pre = ExperimentManifest::new("eval", snapshot.clone(), inputs_map.clone(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;

    let mut rows = Vec::new();
    for name in &cfg.splits {
        let split = data.splits.get(name).ok_or_else(|| {
            CliError::Config(format!(
                "split '{name}' not in the dataset (has: {})",
                data.splits.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let report = exact_match_em(model.as_ref(), &split.inputs, &split.targets, cfg.batch)?;
        println!(
            "{name}: {}/{} exact match (em {:.4})",
            report.matches,
            report.total,
            report.em()
        );
        rows.push(vec![
            name.clone(),
            report.total.to_string(),
            report.matches.to_string(),
            fmt_f64(report.em()),
        ]);
    }
    write_table(&dir.join("eval.csv"), EVAL_V1, &rows)?;

    let mut manifest = ExperimentManifest::new("eval", snapshot, inputs_map, vec![]);
    manifest.outputs = vec!["eval.csv".to_string()];
    manifest.save(&dir)?;
    println!("wrote {}", dir.join("eval.csv").display());
    Ok(())
}
