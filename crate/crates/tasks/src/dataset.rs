//! Dataset files and manifests.
//!
//! One example per line: input tokens space-separated, a tab, then target
//! tokens space-separated, UTF-8, `\n` line endings. A split directory
//! holds one `.tsv` file per split plus a `manifest.json` recording the
//! generator parameters, per-split counts and SHA-256 checksums.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::copy::CopySplit;
use crate::robo::RoboSplit;
use crate::{Result, TaskError};

/// A dataset line: input tokens and target tokens.
pub type Example = (Vec<String>, Vec<String>);

pub fn write_examples<'a, I>(path: &Path, examples: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a [String], &'a [String])>,
{
    let mut buf = String::new();
    for (input, target) in examples {
        buf.push_str(&input.join(" "));
        buf.push('\t');
        buf.push_str(&target.join(" "));
        buf.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn read_examples(path: &Path) -> Result<Vec<Example>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some((input, target)) = line.split_once('\t') else {
            return Err(TaskError::Format {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected exactly one tab separating input from target".into(),
            });
        };
        let split = |s: &str| -> Vec<String> {
            s.split_whitespace().map(str::to_string).collect()
        };
        out.push((split(input), split(target)));
    }
    Ok(out)
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Manifest describing one generated dataset directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub task: String,
    pub seed: u64,
    pub policy: String,
    pub params: serde_json::Value,
    pub counts: BTreeMap<String, usize>,
    pub checksums: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn digits_as_example(d: &[u8]) -> Example {
    let toks: Vec<String> = d.iter().map(|x| x.to_string()).collect();
    (toks.clone(), toks)
}

/// Writes `train.tsv`, `id_test.tsv`, `nin_test.tsv` and `manifest.json`
/// into `dir` (created if needed). Returns the manifest.
pub fn write_copy_split(dir: &Path, split: &CopySplit) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let files: [(&str, &Vec<crate::copy::Digits>); 3] = [
        ("train", &split.train),
        ("id_test", &split.id_test),
        ("nin_test", &split.nin_test),
    ];
    let mut counts = BTreeMap::new();
    let mut checksums = BTreeMap::new();
    for (name, seqs) in files {
        let path = dir.join(format!("{name}.tsv"));
        let examples: Vec<Example> = seqs.iter().map(|d| digits_as_example(d)).collect();
        write_examples(&path, examples.iter().map(|(i, t)| (&i[..], &t[..])))?;
        counts.insert(name.to_string(), seqs.len());
        checksums.insert(format!("{name}.tsv"), sha256_hex(&path)?);
    }
    let manifest = DatasetManifest {
        task: "copy".to_string(),
        seed: split.seed,
        policy: split.policy.clone(),
        params: serde_json::json!({
            "alphabet": split.alphabet,
            "seq_len": crate::copy::SEQ_LEN,
            "train_size": split.train.len(),
        }),
        counts,
        checksums,
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Writes `train.tsv`, `test.tsv` and `manifest.json` into `dir`.
pub fn write_robo_split(dir: &Path, split: &RoboSplit) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut counts = BTreeMap::new();
    let mut checksums = BTreeMap::new();
    for (name, examples) in [("train", &split.train), ("test", &split.test)] {
        let path = dir.join(format!("{name}.tsv"));
        write_examples(
            &path,
            examples.iter().map(|e| (&e.command[..], &e.actions[..])),
        )?;
        counts.insert(name.to_string(), examples.len());
        checksums.insert(format!("{name}.tsv"), sha256_hex(&path)?);
    }
    let manifest = DatasetManifest {
        task: "robo".to_string(),
        seed: split.seed,
        policy: split.policy.clone(),
        params: serde_json::json!({
            "max_words": split.max_words,
            "train_frac": split.train.len() as f64
                / (split.train.len() + split.test.len()) as f64,
        }),
        counts,
        checksums,
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Paths of the files a split directory is expected to contain.
pub fn split_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.tsv"))
}
