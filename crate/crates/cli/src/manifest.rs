//! Experiment manifests: one JSON file per invocation capturing the merged
//! config, input checksums, and output paths. Outputs are reachable from
//! the manifest alone, and re-running a command with `--config
//! <manifest.json>` reproduces its CSV outputs byte-exactly (64-bit mode,
//! single worker). The manifest's own `created_unix` field naturally
//! differs between runs; file outputs are the reproducibility contract.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FORMAT: &str = "tprlab-manifest";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format: String,
    /// Tool version that produced this manifest.
    pub version: String,
    /// Deterministic id: the subcommand plus a digest of the merged config
    /// and input checksums. Re-running the same setup yields the same id.
    pub id: String,
    pub subcommand: String,
    /// The merged config snapshot: `{"global": …, "command": …}`.
    pub config: serde_json::Value,
    /// Input file → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub created_unix: u64,
}

impl ExperimentManifest {
    pub fn new(
        subcommand: &str,
        config: serde_json::Value,
        inputs: BTreeMap<String, String>,
        outputs: Vec<String>,
    ) -> Self {
        let id = derive_id(subcommand, &config, &inputs);
        Self {
            format: MANIFEST_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            id,
            subcommand: subcommand.to_string(),
            config,
            inputs,
            outputs,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serializing manifest: {e}")))?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")
            .map_err(|e| CliError::Io(format!("writing manifest: {e}")))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|_| CliError::MissingInput(format!("no manifest at {}", path.display())))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::Config(format!(
                "{} is not an experiment manifest (format '{}')",
                path.display(),
                m.format
            )));
        }
        Ok(m)
    }
}

fn derive_id(
    subcommand: &str,
    config: &serde_json::Value,
    inputs: &BTreeMap<String, String>,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(subcommand.as_bytes());
    hasher.update(b"\0");
    // serde_json serializes maps in key order, so this is canonical enough
    // for identical configs to hash identically.
    hasher.update(serde_json::to_string(config).unwrap_or_default().as_bytes());
    hasher.update(b"\0");
    for (k, v) in inputs {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\0");
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        hex.push_str(&format!("{byte:02x}"));
    }
    format!("{subcommand}-{hex}")
}

/// Loads the command config for `subcommand` from `--config FILE`. The file
/// may be a bare config object or a previously written experiment manifest;
/// a manifest must have been produced by the same subcommand.
pub fn load_config_value(path: &Path, subcommand: &str) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|_| CliError::MissingInput(format!("no config file at {}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if value.get("format").and_then(|f| f.as_str()) == Some(MANIFEST_FORMAT) {
        let manifest: ExperimentManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if manifest.subcommand != subcommand {
            return Err(CliError::Config(format!(
                "manifest {} was produced by '{}', not '{}'",
                path.display(),
                manifest.subcommand,
                subcommand
            )));
        }
        manifest
            .config
            .get("command")
            .cloned()
            .ok_or_else(|| CliError::Config("manifest lacks a config snapshot".into()))
    } else {
        Ok(value)
    }
}

/// SHA-256 of a file, as lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|_| CliError::MissingInput(format!("cannot read {}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

/// The root under which experiments land when `--out` is not given:
/// `$TPRLAB_OUT` if set, `./runs` otherwise.
pub fn output_root() -> PathBuf {
    std::env::var_os("TPRLAB_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Locates an experiment directory by path or id. A path that exists wins;
/// otherwise every child of the output root is scanned for a manifest with
/// the given id.
pub fn find_experiment(spec: &str) -> Result<PathBuf> {
    let as_path = PathBuf::from(spec);
    if as_path.join(MANIFEST_FILE).is_file() {
        return Ok(as_path);
    }
    let root = output_root();
    let entries = fs::read_dir(&root).map_err(|_| {
        CliError::MissingInput(format!(
            "'{spec}' is not an experiment directory and the output root {} does not exist",
            root.display()
        ))
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.is_file() {
            if let Ok(m) = ExperimentManifest::load(&manifest_path) {
                if m.id == spec {
                    return Ok(dir);
                }
            }
        }
    }
    Err(CliError::MissingInput(format!(
        "no experiment named '{spec}' under {}",
        root.display()
    )))
}
