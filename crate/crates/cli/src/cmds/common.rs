//! Plumbing shared by the subcommands: global flags, dataset loading with
//! checksum verification, vocabulary mapping, checkpoint loading with
//! precision hints, and the little worker pool for independent runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tprlab_models::{load_model, ModelConfig, ModelKind, SeqModel};
use tprlab_tasks::dataset::{read_examples, sha256_hex, split_file, DatasetManifest, Example};
use tprlab_tasks::vocab::{copy_vocab, robo_vocab, Vocab};
use tprlab_tensor::Scalar;

use crate::error::{CliError, Result};
use crate::manifest::file_sha256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

/// Global flags, snapshotted into every manifest.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Global {
    pub seed: Option<u64>,
    pub workers: usize,
    pub precision: Precision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Copy,
    Robo,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Copy => "copy",
            Task::Robo => "robo",
        }
    }

    pub fn vocab(self) -> Vocab {
        match self {
            Task::Copy => copy_vocab(),
            Task::Robo => robo_vocab(),
        }
    }

    pub fn split_names(self) -> &'static [&'static str] {
        match self {
            Task::Copy => &["train", "id_test", "nin_test"],
            Task::Robo => &["train", "test"],
        }
    }

    /// A model `max_len` that covers the task's longest input, output, and
    /// sequence markers.
    pub fn default_max_len(self) -> usize {
        match self {
            Task::Copy => 8,
            Task::Robo => 16,
        }
    }
}

/// A split as token-id sequences ready for models.
pub struct IdSplit {
    pub inputs: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
}

/// A loaded dataset directory: verified manifest, vocabulary, splits.
pub struct LoadedData {
    pub manifest: DatasetManifest,
    pub vocab: Vocab,
    pub splits: BTreeMap<String, IdSplit>,
    /// file name → sha256, for the experiment manifest.
    pub checksums: BTreeMap<String, String>,
}

/// Reads a dataset directory written by `generate-data`, verifying that the
/// files still match the checksums in its manifest.
pub fn load_data(task: Task, dir: &Path) -> Result<LoadedData> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(CliError::MissingInput(format!(
            "no dataset manifest at {}",
            manifest_path.display()
        )));
    }
    let manifest = DatasetManifest::load(&manifest_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    if manifest.task != task.as_str() {
        return Err(CliError::Data(format!(
            "{} holds a '{}' dataset, this command needs '{}'",
            dir.display(),
            manifest.task,
            task.as_str()
        )));
    }
    let vocab = task.vocab();
    let mut splits = BTreeMap::new();
    let mut checksums = BTreeMap::new();
    checksums.insert(
        rel_name(dir, &manifest_path),
        file_sha256(&manifest_path)?,
    );
    for &name in task.split_names() {
        let path = split_file(dir, name);
        let actual = sha256_hex(&path)
            .map_err(|_| CliError::MissingInput(format!("missing split file {}", path.display())))?;
        let expected = manifest
            .checksums
            .get(&format!("{name}.tsv"))
            .ok_or_else(|| {
                CliError::Data(format!("dataset manifest lacks a checksum for {name}.tsv"))
            })?;
        if &actual != expected {
            return Err(CliError::Data(format!(
                "{} does not match its manifest checksum — regenerate the dataset",
                path.display()
            )));
        }
        let examples = read_examples(&path)?;
        splits.insert(name.to_string(), ids_for(&vocab, &examples, &path)?);
        checksums.insert(rel_name(dir, &path), actual);
    }
    Ok(LoadedData {
        manifest,
        vocab,
        splits,
        checksums,
    })
}

fn rel_name(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| path.display().to_string())
}

fn ids_for(vocab: &Vocab, examples: &[Example], path: &Path) -> Result<IdSplit> {
    let map = |words: &[String], line: usize| -> Result<Vec<usize>> {
        words
            .iter()
            .map(|w| {
                vocab.id(w).map_err(|_| {
                    CliError::Data(format!(
                        "{} line {line}: '{w}' is not in the task vocabulary",
                        path.display()
                    ))
                })
            })
            .collect()
    };
    let mut inputs = Vec::with_capacity(examples.len());
    let mut targets = Vec::with_capacity(examples.len());
    for (i, (input, target)) in examples.iter().enumerate() {
        inputs.push(map(input, i + 1)?);
        targets.push(map(target, i + 1)?);
    }
    Ok(IdSplit { inputs, targets })
}

/// Loads a model checkpoint, translating a dtype mismatch into advice.
pub fn load_model_cli<F: Scalar>(path: &Path) -> Result<Box<dyn SeqModel<F>>> {
    if !path.is_file() {
        return Err(CliError::MissingInput(format!(
            "no checkpoint at {}",
            path.display()
        )));
    }
    load_model::<F>(path).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("dtype") {
            CliError::Data(format!(
                "{}: {msg} — pass the matching --precision",
                path.display()
            ))
        } else {
            CliError::Data(format!("{}: {msg}", path.display()))
        }
    })
}

/// Builds a `ModelConfig` from the shared model knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelKnobs {
    pub model: ModelKind,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub pos_encoding: tprlab_models::PosEncoding,
    pub pooling: tprlab_models::Pooling,
    pub lstm_hidden: Option<usize>,
    pub lstm_attention: bool,
    pub max_len: Option<usize>,
    pub model_seed: u64,
}

impl Default for ModelKnobs {
    fn default() -> Self {
        Self {
            model: ModelKind::Transformer,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            dropout: 0.0,
            pos_encoding: tprlab_models::PosEncoding::Sinusoidal,
            pooling: tprlab_models::Pooling::Mean,
            lstm_hidden: None,
            lstm_attention: false,
            max_len: None,
            model_seed: 0,
        }
    }
}

impl ModelKnobs {
    pub fn to_model_config(&self, task: Task, vocab_size: usize) -> ModelConfig {
        let mut cfg = ModelConfig::defaults(
            self.model,
            vocab_size,
            self.max_len.unwrap_or_else(|| task.default_max_len()),
        );
        cfg.d_model = self.d_model;
        cfg.n_heads = self.n_heads;
        cfg.n_layers = self.n_layers;
        cfg.d_ff = self.d_ff;
        cfg.dropout = self.dropout;
        cfg.pos_encoding = self.pos_encoding;
        cfg.pooling = self.pooling;
        cfg.lstm_hidden = self.lstm_hidden;
        cfg.lstm_attention = self.lstm_attention;
        cfg.seed = self.model_seed;
        cfg
    }
}

/// The training knobs shared by `train`, `census`, and `sweep`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainKnobs {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub eval_every: usize,
    pub patience: usize,
    pub grad_clip: Option<f64>,
    pub eval_cap: usize,
    pub decode_batch: usize,
    pub train_seed: u64,
}

impl Default for TrainKnobs {
    fn default() -> Self {
        let t = tprlab_harness::TrainConfig::default();
        Self {
            steps: t.steps,
            batch_size: t.batch_size,
            lr: t.optimizer.lr,
            eval_every: t.eval_every,
            patience: t.patience,
            grad_clip: t.grad_clip,
            eval_cap: t.eval_cap,
            decode_batch: t.decode_batch,
            train_seed: t.seed,
        }
    }
}

impl TrainKnobs {
    pub fn to_train_config(&self) -> tprlab_harness::TrainConfig {
        tprlab_harness::TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            optimizer: tprlab_tensor::OptimizerConfig {
                lr: self.lr,
                ..Default::default()
            },
            eval_every: self.eval_every,
            patience: self.patience,
            grad_clip: self.grad_clip,
            eval_cap: self.eval_cap,
            decode_batch: self.decode_batch,
            seed: self.train_seed,
        }
    }
}

/// Parses a strict-schema command config out of a JSON value.
pub fn config_from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("config: {e}")))
}

/// Resolves the output directory: `--out` wins, else `<output root>/<id>`.
pub fn resolve_out(out: Option<&Path>, id: &str) -> Result<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| crate::manifest::output_root().join(id));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Runs `n` independent jobs over up to `workers` threads, preserving index
/// order in the results. Each job depends only on its index, so the output
/// is identical no matter how many workers run.
pub fn run_indexed<T, J>(n: usize, workers: usize, job: J) -> Vec<T>
where
    T: Send,
    J: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = job(i);
                slots.lock().expect("result slots poisoned")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("every index ran"))
        .collect()
}

/// Renders token ids as vocabulary words, space-joined.
pub fn render_ids(vocab: &Vocab, ids: &[usize]) -> String {
    ids.iter()
        .map(|&id| vocab.token(id).unwrap_or("<?>").to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
