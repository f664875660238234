//! `analyze`: fit tensor-product decompositions of a trained encoder under
//! several role schemes and rank them by substitution accuracy.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_analysis::{collect_encodings_cached, role_scheme_tournament, RoleScheme, TpdnConfig};
use tprlab_tensor::{OptimizerConfig, Scalar};

use super::common::{
    config_from_value, load_data, load_model_cli, resolve_out, Global, Precision, Task,
};
use crate::error::{CliError, Result};
use crate::manifest::{file_sha256, load_config_value, ExperimentManifest};
use crate::table::{fmt_f64, write_table, ANALYSIS_V1};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// JSON config file (or a previous analyze manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Split whose inputs are encoded and fitted (default: train).
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated role schemes, or "all".
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    dim_f: Option<usize>,
    #[arg(long)]
    dim_r: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    max_examples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub task: Task,
    pub checkpoint: Option<String>,
    pub data: Option<String>,
    pub split: String,
    /// Role scheme names; empty means every scheme.
    pub schemes: Vec<String>,
    pub dim_f: usize,
    pub dim_r: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub fit_seed: u64,
    /// Cap on fitted examples (the split is used in file order).
    pub max_examples: usize,
    /// Decode length bound when scoring substitution accuracy.
    pub max_out: usize,
    pub decode_batch: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        let tpdn = TpdnConfig::default();
        Self {
            task: Task::Copy,
            checkpoint: None,
            data: None,
            split: "train".to_string(),
            schemes: vec![],
            dim_f: tpdn.dim_f,
            dim_r: tpdn.dim_r,
            steps: tpdn.steps,
            batch: tpdn.batch_size,
            lr: tpdn.optimizer.lr,
            fit_seed: 0,
            max_examples: 2048,
            max_out: 16,
            decode_batch: 256,
        }
    }
}

pub fn run(global: Global, args: AnalyzeArgs) -> Result<()> {
    match global.precision {
        Precision::F32 => run_typed::<f32>(global, args),
        Precision::F64 => run_typed::<f64>(global, args),
    }
}

fn run_typed<F: Scalar>(global: Global, args: AnalyzeArgs) -> Result<()> {
    let mut cfg: AnalyzeConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "analyze")?)?,
        None => AnalyzeConfig::default(),
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
    if let Some(split) = &args.split {
        cfg.split = split.clone();
    }
    if let Some(s) = &args.schemes {
        cfg.schemes = if s.trim() == "all" {
            vec![]
        } else {
            s.split(',').map(|x| x.trim().to_string()).collect()
        };
    }
    if let Some(v) = args.dim_f {
        cfg.dim_f = v;
    }
    if let Some(v) = args.dim_r {
        cfg.dim_r = v;
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.max_examples {
        cfg.max_examples = v;
    }
    if let Some(seed) = global.seed {
        cfg.fit_seed = seed;
    }
    let schemes: Vec<RoleScheme> = if cfg.schemes.is_empty() {
        RoleScheme::ALL.to_vec()
    } else {
        cfg.schemes
            .iter()
            .map(|s| RoleScheme::parse(s).map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<_>>()?
    };
    let ckpt_path = PathBuf::from(cfg.checkpoint.clone().ok_or_else(|| {
        CliError::Config("no checkpoint: pass --checkpoint or set \"checkpoint\"".into())
    })?);
    let data_dir = PathBuf::from(cfg.data.clone().ok_or_else(|| {
        CliError::Config("no dataset directory: pass --data or set \"data\"".into())
    })?);

    let data = load_data(cfg.task, &data_dir)?;
    let model = load_model_cli::<F>(&ckpt_path)?;
    let split = data.splits.get(&cfg.split).ok_or_else(|| {
        CliError::Config(format!(
            "split '{}' not in the dataset (has: {})",
            cfg.split,
            data.splits.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let inputs: Vec<Vec<usize>> = split.inputs.iter().take(cfg.max_examples).cloned().collect();
    if inputs.is_empty() {
        return Err(CliError::Data(format!("split '{}' is empty", cfg.split)));
    }
    let max_len = inputs.iter().map(Vec::len).max().unwrap_or(1);
    let tokens: Vec<String> = (0..data.vocab.size())
        .map(|i| data.vocab.token(i).expect("dense vocab ids").to_string())
        .collect();

    let snapshot = serde_json::json!({"global": global, "command": cfg});
    let mut inputs_map = data.checksums.clone();
    inputs_map.insert(
        format!("checkpoint:{}", ckpt_path.display()),
        file_sha256(&ckpt_path)?,
    );
    let pre = ExperimentManifest::new("analyze", snapshot.clone(), inputs_map.clone(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;

    let (encodings, cache_hit) = collect_encodings_cached(
        model.as_ref(),
        &inputs,
        cfg.decode_batch,
        &dir.join("encodings.bin"),
    )?;
    eprintln!(
        "{} encodings of width {} ({})",
        encodings.shape()[0],
        encodings.shape()[1],
        if cache_hit { "cache hit" } else { "freshly encoded" }
    );

    let tpdn_cfg = TpdnConfig {
        dim_f: cfg.dim_f,
        dim_r: cfg.dim_r,
        steps: cfg.steps,
        batch_size: cfg.batch,
        optimizer: OptimizerConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        seed: cfg.fit_seed,
        log_every: 500,
    };
    let (rows, fits) = role_scheme_tournament(
        model.as_ref(),
        &inputs,
        &encodings,
        &tokens,
        &schemes,
        max_len,
        &tpdn_cfg,
        cfg.max_out,
        cfg.decode_batch,
    )?;

    let mut csv_rows = Vec::new();
    let mut outputs = vec!["analysis.csv".to_string(), "encodings.bin".to_string()];
    for (rank, (row, fit)) in rows.iter().zip(&fits).enumerate() {
        csv_rows.push(vec![
            (rank + 1).to_string(),
            row.scheme.as_str().to_string(),
            fmt_f64(row.mse),
            fmt_f64(row.substitution),
        ]);
        let name = format!("fit_{}.ckpt", row.scheme.as_str());
        fit.save(&dir.join(&name))?;
        outputs.push(name);
        println!(
            "{}. {}: mse {:.3e}, substitution {:.4}",
            rank + 1,
            row.scheme.as_str(),
            row.mse,
            row.substitution
        );
    }
    write_table(&dir.join("analysis.csv"), ANALYSIS_V1, &csv_rows)?;

    let mut manifest = ExperimentManifest::new("analyze", snapshot, inputs_map, vec![]);
    manifest.outputs = outputs;
    manifest.save(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
