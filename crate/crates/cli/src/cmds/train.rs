//! `train`: one model, one dataset directory, one run. Writes the training
//! curve as CSV, the full run record as JSON, the model checkpoint, and the
//! experiment manifest.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_harness::train_run;
use tprlab_models::{build_model, save_model, ModelKind};
use tprlab_tensor::Scalar;

use super::common::{
    config_from_value, load_data, resolve_out, Global, ModelKnobs, Precision, Task, TrainKnobs,
};
use crate::error::{CliError, Result};
use crate::manifest::{load_config_value, ExperimentManifest};
use crate::table::{fmt_f64, write_table, CURVE_V1};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON config file (or a previous train manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Dataset directory from `generate-data`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model kind: lstm | transformer | necst.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    pub task: Task,
    pub data: Option<String>,
    pub model: ModelKnobs,
    pub train: TrainKnobs,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            task: Task::Copy,
            data: None,
            model: ModelKnobs::default(),
            train: TrainKnobs::default(),
        }
    }
}

pub fn run(global: Global, args: TrainArgs) -> Result<()> {
    match global.precision {
        Precision::F32 => run_typed::<f32>(global, args),
        Precision::F64 => run_typed::<f64>(global, args),
    }
}

fn run_typed<F: Scalar>(global: Global, args: TrainArgs) -> Result<()> {
    let mut cfg: TrainCmdConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "train")?)?,
        None => TrainCmdConfig::default(),
    };
    if let Some(task) = args.task {
        cfg.task = task;
    }
    if let Some(data) = &args.data {
        cfg.data = Some(data.display().to_string());
    }
    if let Some(kind) = &args.model {
        cfg.model.model = ModelKind::parse(kind).map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if let Some(batch) = args.batch_size {
        cfg.train.batch_size = batch;
    }
    if let Some(lr) = args.lr {
        cfg.train.lr = lr;
    }
    if let Some(d) = args.d_model {
        cfg.model.d_model = d;
    }
    if let Some(seed) = global.seed {
        cfg.model.model_seed = seed;
        cfg.train.train_seed = seed;
    }
    let data_dir = PathBuf::from(cfg.data.clone().ok_or_else(|| {
        CliError::Config("no dataset directory: pass --data or set \"data\" in the config".into())
    })?);

    let data = load_data(cfg.task, &data_dir)?;
    let snapshot = serde_json::json!({"global": global, "command": cfg});
    let pre = ExperimentManifest::new("train", snapshot.clone(), data.checksums.clone(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;

    let model_cfg = cfg.model.to_model_config(cfg.task, data.vocab.size());
    let mut model = build_model::<F>(&model_cfg)?;
    let train_cfg = cfg.train.to_train_config();
    let split = data
        .splits
        .get("train")
        .expect("load_data always includes the train split");
    eprintln!(
        "training {} on {} examples ({} steps, precision {})",
        model_cfg.model_kind.as_str(),
        split.inputs.len(),
        train_cfg.steps,
        global.precision.as_str()
    );
    let record = train_run(model.as_mut(), &split.inputs, &split.targets, &train_cfg)?;

    let rows: Vec<Vec<String>> = record
        .history
        .iter()
        .map(|p| {
            vec![
                p.step.to_string(),
                fmt_f64(p.avg_loss),
                fmt_f64(p.train_em),
            ]
        })
        .collect();
    write_table(&dir.join("curve.csv"), CURVE_V1, &rows)?;
    save_model(&dir.join("model.ckpt"), model.as_ref())?;
    let run_json = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::Io(format!("serializing run record: {e}")))?;
    std::fs::write(dir.join("run.json"), run_json + "\n")
        .map_err(|e| CliError::Io(format!("writing run record: {e}")))?;

    let mut manifest = ExperimentManifest::new("train", snapshot, data.checksums, vec![]);
    manifest.outputs = vec![
        "curve.csv".to_string(),
        "model.ckpt".to_string(),
        "run.json".to_string(),
    ];
    manifest.save(&dir)?;

    if let Some(failure) = &record.failure {
        return Err(CliError::Runtime(format!(
            "training failed at step {}: {} (artifacts in {})",
            failure.step,
            failure.message,
            dir.display()
        )));
    }
    println!(
        "trained {} for {} steps (final loss {:.6}, early stop {}) -> {}",
        model_cfg.model_kind.as_str(),
        record.steps_run,
        record.final_loss,
        record.stopped_early,
        dir.display()
    );
    Ok(())
}
