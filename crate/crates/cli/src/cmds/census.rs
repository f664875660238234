//! `census`: train several seeds of each model kind on a copy dataset, then
//! decode every withheld n-in-n sequence and report exact-match counts per
//! repeated-digit stratum.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_harness::{mean_stratum_em, nin_census, train_run, CensusReport, RunRecord};
use tprlab_models::{build_model, ModelKind};
use tprlab_tasks::copy::SEQ_LEN;
use tprlab_tensor::Scalar;

use super::common::{
    config_from_value, load_data, resolve_out, run_indexed, Global, ModelKnobs, Precision, Task,
    TrainKnobs,
};
use crate::error::{CliError, Result};
use crate::manifest::{load_config_value, ExperimentManifest};
use crate::table::{
    fmt_f64, write_table, CENSUS_RUNS_V1, CENSUS_STRATA_V1, CENSUS_SUMMARY_V1,
};

#[derive(Args, Debug)]
pub struct CensusArgs {
    /// JSON config file (or a previous census manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated model kinds (default: lstm,transformer,necst).
    #[arg(long)]
    models: Option<String>,
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
pub struct CensusConfig {
    pub data: Option<String>,
    pub models: Vec<ModelKind>,
    pub seeds: u64,
    pub model: ModelKnobs,
    pub train: TrainKnobs,
    pub census_batch: usize,
    /// Stop each census at the first miss (faster when only perfection
    /// matters; stratum accuracies then cover only the examined prefix).
    pub perfect_only: bool,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self {
            data: None,
            models: ModelKind::ALL.to_vec(),
            seeds: 1,
            model: ModelKnobs::default(),
            train: TrainKnobs::default(),
            census_batch: 512,
            perfect_only: false,
        }
    }
}

struct CensusRun {
    kind: ModelKind,
    seed: u64,
    record: RunRecord,
    report: CensusReport,
}

pub fn run(global: Global, args: CensusArgs) -> Result<()> {
    match global.precision {
        Precision::F32 => run_typed::<f32>(global, args),
        Precision::F64 => run_typed::<f64>(global, args),
    }
}

fn run_typed<F: Scalar>(global: Global, args: CensusArgs) -> Result<()> {
    let mut cfg: CensusConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "census")?)?,
        None => CensusConfig::default(),
    };
    if let Some(data) = &args.data {
        cfg.data = Some(data.display().to_string());
    }
    if let Some(models) = &args.models {
        cfg.models = models
            .split(',')
            .map(|m| ModelKind::parse(m.trim()).map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<_>>()?;
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if cfg.models.is_empty() || cfg.seeds == 0 {
        return Err(CliError::Config(
            "census needs at least one model kind and one seed".into(),
        ));
    }
    let data_dir = PathBuf::from(cfg.data.clone().ok_or_else(|| {
        CliError::Config("no dataset directory: pass --data or set \"data\"".into())
    })?);

    let data = load_data(Task::Copy, &data_dir)?;
    let alphabet = data
        .manifest
        .params
        .get("alphabet")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CliError::Data("dataset manifest lacks an alphabet size".into()))?
        as usize;

    let snapshot = serde_json::json!({"global": global, "command": cfg});
    let pre = ExperimentManifest::new("census", snapshot.clone(), data.checksums.clone(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;

    let jobs: Vec<(ModelKind, u64)> = cfg
        .models
        .iter()
        .flat_map(|&kind| (0..cfg.seeds).map(move |seed| (kind, seed)))
        .collect();
    let train_split = data
        .splits
        .get("train")
        .expect("load_data always includes the train split");
    let runs: Vec<CensusRun> = run_indexed(jobs.len(), global.workers, |i| {
        let (kind, seed) = jobs[i];
        let mut model_cfg = cfg.model.to_model_config(Task::Copy, data.vocab.size());
        model_cfg.model_kind = kind;
        model_cfg.seed = seed;
        let mut train_cfg = cfg.train.to_train_config();
        train_cfg.seed = seed;
        let mut model = build_model::<F>(&model_cfg)?;
        let record = train_run(model.as_mut(), &train_split.inputs, &train_split.targets, &train_cfg)?;
        let report = nin_census(model.as_ref(), alphabet, cfg.census_batch, cfg.perfect_only)?;
        eprintln!(
            "census {}/{}: {} seed {} nin_em {:.4} perfect {}",
            i + 1,
            jobs.len(),
            kind.as_str(),
            seed,
            report.em(),
            report.perfect()
        );
        Ok(CensusRun { kind, seed, record, report })
    })?;

    let mut run_rows = Vec::new();
    let mut strata_rows = Vec::new();
    for r in &runs {
        run_rows.push(vec![
            r.kind.as_str().to_string(),
            r.seed.to_string(),
            r.record.steps_run.to_string(),
            r.record.stopped_early.to_string(),
            r.report.matches.to_string(),
            r.report.total.to_string(),
            fmt_f64(r.report.em()),
            r.report.perfect().to_string(),
        ]);
        for (s, stratum) in r.report.strata.iter().enumerate() {
            let note = if stratum.total == 0 {
                "empty stratum".to_string()
            } else if let Some(n) = r.report.aborted_after {
                format!("counts cover the first {n} sequences only")
            } else {
                String::new()
            };
            strata_rows.push(vec![
                r.kind.as_str().to_string(),
                r.seed.to_string(),
                (s + 1).to_string(),
                stratum.matches.to_string(),
                stratum.total.to_string(),
                fmt_f64(stratum.em()),
                note,
            ]);
        }
    }
    write_table(&dir.join("runs.csv"), CENSUS_RUNS_V1, &run_rows)?;
    write_table(&dir.join("strata.csv"), CENSUS_STRATA_V1, &strata_rows)?;

    let mut summary_rows = Vec::new();
    for &kind in &cfg.models {
        let reports: Vec<CensusReport> = runs
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.report.clone())
            .collect();
        let perfect = reports.iter().filter(|r| r.perfect()).count();
        let exhaustive = reports.iter().all(|r| r.aborted_after.is_none());
        let (mean_em, stratum_means) = if exhaustive {
            let mean_em = reports.iter().map(|r| r.em()).sum::<f64>() / reports.len() as f64;
            (fmt_f64(mean_em), mean_stratum_em(&reports)?.map(fmt_f64))
        } else {
            // A census stopped at its first miss has no honest accuracy.
            (String::new(), [const { String::new() }; SEQ_LEN])
        };
        let mut row = vec![
            kind.as_str().to_string(),
            reports.len().to_string(),
            perfect.to_string(),
            fmt_f64(perfect as f64 / reports.len() as f64),
            mean_em,
        ];
        row.extend(stratum_means);
        summary_rows.push(row);
    }
    write_table(&dir.join("summary.csv"), CENSUS_SUMMARY_V1, &summary_rows)?;

    let mut manifest = ExperimentManifest::new("census", snapshot, data.checksums, vec![]);
    manifest.outputs = vec![
        "runs.csv".to_string(),
        "strata.csv".to_string(),
        "summary.csv".to_string(),
    ];
    manifest.save(&dir)?;
    for row in &summary_rows {
        println!(
            "{}: {}/{} perfect, mean nin_em {}",
            row[0],
            row[2],
            row[1],
            if row[4].is_empty() { "n/a" } else { &row[4] }
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
