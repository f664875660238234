//! `edit`: operate on a trained command encoder through a fitted
//! tensor-product decomposition — either apply one explicit edit script to
//! one command, or run a randomized chain-substitution experiment.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use tprlab_analysis::{
    apply_edit, collect_encodings, decode_pooled_rows, edit_experiment, EditScript, TpdnFit,
};
use tprlab_tasks::robo::{
    enumerate_commands, robo_interpret, CONJUNCTION, DIRECTIONS, REPEATS, VERBS,
};
use tprlab_tasks::robo_vocab;
use tprlab_tensor::{Scalar, Tensor};

use super::common::{
    config_from_value, load_model_cli, render_ids, resolve_out, Global, Precision,
};
use crate::error::{CliError, Result};
use crate::manifest::{file_sha256, load_config_value, ExperimentManifest};
use crate::table::{fmt_f64, write_table, EDIT_CURVE_V1, EDIT_V1};

#[derive(Args, Debug)]
pub struct EditArgs {
    /// JSON config file (or a previous edit manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained command-model checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Fitted decomposition checkpoint from `analyze`.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Command to edit, e.g. "jump twice" (single-edit mode).
    #[arg(long)]
    command: Option<String>,
    /// Edit script, e.g. "-twice@1 +thrice@1" (single-edit mode).
    #[arg(long)]
    script: Option<String>,
    /// Chain length k for the substitution experiment (curve mode).
    #[arg(long)]
    chain: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditConfig {
    pub checkpoint: Option<String>,
    pub fit: Option<String>,
    pub command: Option<String>,
    pub script: Option<String>,
    pub chain: usize,
    pub trials: usize,
    pub pool_max_words: usize,
    pub edit_seed: u64,
    pub max_out: usize,
    pub decode_batch: usize,
}

impl Default for EditConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            fit: None,
            command: None,
            script: None,
            chain: 5,
            trials: 200,
            pool_max_words: 5,
            edit_seed: 0,
            max_out: 16,
            decode_batch: 64,
        }
    }
}

/// Words the experiment may substitute: every verb, direction and repeat,
/// plus the conjunction.
fn substitutable_words() -> Vec<String> {
    VERBS
        .iter()
        .chain(DIRECTIONS.iter())
        .chain(REPEATS.iter())
        .map(|w| w.to_string())
        .chain([CONJUNCTION.to_string()])
        .collect()
}

pub fn run(global: Global, args: EditArgs) -> Result<()> {
    match global.precision {
        Precision::F32 => run_typed::<f32>(global, args),
        Precision::F64 => run_typed::<f64>(global, args),
    }
}

fn run_typed<F: Scalar>(global: Global, args: EditArgs) -> Result<()> {
    let mut cfg: EditConfig = match &args.config {
        Some(path) => config_from_value(load_config_value(path, "edit")?)?,
        None => EditConfig::default(),
    };
    if let Some(ckpt) = &args.checkpoint {
        cfg.checkpoint = Some(ckpt.display().to_string());
    }
    if let Some(fit) = &args.fit {
        cfg.fit = Some(fit.display().to_string());
    }
    if let Some(command) = &args.command {
        cfg.command = Some(command.clone());
    }
    if let Some(script) = &args.script {
        cfg.script = Some(script.clone());
    }
    if let Some(chain) = args.chain {
        cfg.chain = chain;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = global.seed {
        cfg.edit_seed = seed;
    }
    let ckpt_path = PathBuf::from(cfg.checkpoint.clone().ok_or_else(|| {
        CliError::Config("no checkpoint: pass --checkpoint or set \"checkpoint\"".into())
    })?);
    let fit_path = PathBuf::from(cfg.fit.clone().ok_or_else(|| {
        CliError::Config("no fitted decomposition: pass --fit or set \"fit\"".into())
    })?);

    let model = load_model_cli::<F>(&ckpt_path)?;
    let fit = TpdnFit::<F>::load(&fit_path)?;
    let vocab = robo_vocab();

    let snapshot = serde_json::json!({"global": global, "command": cfg});
    let mut inputs_map = std::collections::BTreeMap::new();
    inputs_map.insert(
        format!("checkpoint:{}", ckpt_path.display()),
        file_sha256(&ckpt_path)?,
    );
    inputs_map.insert(format!("fit:{}", fit_path.display()), file_sha256(&fit_path)?);
    let pre = ExperimentManifest::new("edit", snapshot.clone(), inputs_map.clone(), vec![]);
    let dir = resolve_out(args.out.as_deref(), &pre.id)?;
    let mut outputs = Vec::new();

    if let Some(command) = &cfg.command {
        // Single-edit mode: encode, apply the script, decode both vectors.
        let script: EditScript = cfg
            .script
            .clone()
            .ok_or_else(|| CliError::Config("single-edit mode needs --script".into()))?
            .parse()
            .map_err(|e: tprlab_analysis::AnalysisError| CliError::Config(e.to_string()))?;
        let words: Vec<String> = command.split_whitespace().map(|w| w.to_string()).collect();
        let oracle = {
            // The oracle interprets the command the script would produce.
            let mut edited = words.clone();
            for step in &script.0 {
                match step {
                    tprlab_analysis::EditStep::Remove { token, role } => {
                        if edited.get(*role).map(|w| w.as_str()) == Some(token.as_str()) {
                            edited[*role] = String::new();
                        }
                    }
                    tprlab_analysis::EditStep::Insert { token, role } => {
                        while edited.len() <= *role {
                            edited.push(String::new());
                        }
                        edited[*role] = token.clone();
                    }
                }
            }
            let edited: Vec<String> = edited.into_iter().filter(|w| !w.is_empty()).collect();
            robo_interpret(&edited)
                .map(|a| a.join(" "))
                .unwrap_or_else(|_| "(ungrammatical)".to_string())
        };
        let ids: Vec<usize> = words
            .iter()
            .map(|w| {
                vocab
                    .id(w)
                    .ok_or_else(|| CliError::Data(format!("unknown word '{w}'")))
            })
            .collect::<Result<_>>()?;
        let encodings = collect_encodings(model.as_ref(), &[ids], cfg.decode_batch)?;
        let enc = encodings.data().to_vec();
        let edited = apply_edit(&enc, &script, &fit)?;
        let width = fit.width();
        let both = Tensor::new(
            vec![2, width],
            enc.iter().chain(edited.iter()).copied().collect(),
        )
        .map_err(CliError::from)?;
        let decodes = decode_pooled_rows(model.as_ref(), &both, cfg.max_out, 2)?;
        let before = render_ids(&vocab, &decodes[0]);
        let after = render_ids(&vocab, &decodes[1]);
        println!("command:       {command}");
        println!("script:        {script}");
        println!("oracle:        {oracle}");
        println!("decode before: {before}");
        println!("decode after:  {after}");
        let rows = vec![vec![
            command.clone(),
            script.to_string().replace(',', ";"),
            oracle.clone(),
            before,
            after,
        ]];
        write_table(&dir.join("edit.csv"), EDIT_V1, &rows)?;
        outputs.push("edit.csv".to_string());
    } else {
        // Curve mode: randomized cumulative substitutions.
        let pool: Vec<Vec<String>> = enumerate_commands(cfg.pool_max_words);
        let curve = edit_experiment(
            model.as_ref(),
            &fit,
            &pool,
            &substitutable_words(),
            cfg.chain,
            cfg.trials,
            cfg.edit_seed,
            cfg.max_out,
            cfg.decode_batch,
        )?;
        let mut rows = vec![vec![
            curve.control.k.to_string(),
            curve.control.trials.to_string(),
            curve.control.matches.to_string(),
            fmt_f64(curve.control.accuracy),
        ]];
        for p in &curve.points {
            rows.push(vec![
                p.k.to_string(),
                p.trials.to_string(),
                p.matches.to_string(),
                fmt_f64(p.accuracy),
            ]);
        }
        write_table(&dir.join("edit_curve.csv"), EDIT_CURVE_V1, &rows)?;
        outputs.push("edit_curve.csv".to_string());

        let mut log = String::new();
        log.push_str(&format!(
            "pool: {} commands up to {} words\n",
            pool.len(),
            cfg.pool_max_words
        ));
        log.push_str(&format!(
            "resamples: {} (first {} logged)\n",
            curve.resamples,
            curve.resample_log.len()
        ));
        for line in &curve.resample_log {
            log.push_str(line);
            log.push('\n');
        }
        log.push_str("bases:\n");
        for base in &curve.bases {
            log.push_str(&base.join(" "));
            log.push('\n');
        }
        std::fs::write(dir.join("edit_log.txt"), log)
            .map_err(|e| CliError::Io(format!("writing edit log: {e}")))?;
        outputs.push("edit_log.txt".to_string());

        println!(
            "control (k=0): {}/{} ({:.4})",
            curve.control.matches, curve.control.trials, curve.control.accuracy
        );
        for p in &curve.points {
            println!("k={}: {}/{} ({:.4})", p.k, p.matches, p.trials, p.accuracy);
        }
    }

    let mut manifest = ExperimentManifest::new("edit", snapshot, inputs_map, vec![]);
    manifest.outputs = outputs;
    manifest.save(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
