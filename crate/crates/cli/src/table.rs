//! CSV tables: the single source of truth for every experiment number.
//! Each table kind has a versioned schema — the exact header line below.
//! Readers validate the header and row widths and fail loudly on drift.
//! Fields never contain commas, quotes, or newlines; floats are written in
//! Rust's shortest round-trip form, so equal values always render equally.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

/// Training curve: one row per evaluation probe.
pub const CURVE_V1: &str = "step,avg_loss,train_em";
/// Exact-match evaluation: one row per scored split.
pub const EVAL_V1: &str = "split,total,matches,em";
/// Multi-seed census: one row per training run.
pub const CENSUS_RUNS_V1: &str =
    "model_kind,seed,steps_run,stopped_early,nin_matches,nin_total,nin_em,perfect";
/// Multi-seed census: one row per (run, coincidence-count stratum).
pub const CENSUS_STRATA_V1: &str = "model_kind,seed,stratum,matches,total,em,note";
/// Multi-seed census: one row per model kind.
pub const CENSUS_SUMMARY_V1: &str =
    "model_kind,seeds,perfect_count,perfect_fraction,mean_nin_em,s1_em,s2_em,s3_em,s4_em,s5_em";
/// Sample-efficiency sweep: one row per (model kind, train size, seed).
pub const SWEEP_V1: &str = "model_kind,train_size,seed,id_matches,id_total,id_em,reached";
/// Sweep summary: one row per model kind.
pub const SWEEP_SUMMARY_V1: &str = "model_kind,min_size_reaching_full_id_em";
/// Role-scheme tournament: one row per scheme, ranked.
pub const ANALYSIS_V1: &str = "rank,scheme,mse,substitution";
/// Edit-chain experiment: one row per substitution count (k=0 is the
/// unedited control).
pub const EDIT_CURVE_V1: &str = "k,trials,matches,accuracy";
/// Single-edit record: what one surgical edit decoded to.
pub const EDIT_V1: &str = "command,script,oracle,decode_before,decode_after";

/// Writes a table: header line, then rows, `\n` endings, UTF-8.
pub fn write_table(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let width = header.split(',').count();
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        if row.len() != width {
            return Err(CliError::Io(format!(
                "internal: row width {} does not match header '{header}'",
                row.len()
            )));
        }
        for field in row {
            debug_assert!(
                !field.contains(',') && !field.contains('\n') && !field.contains('"'),
                "field would corrupt the table: {field:?}"
            );
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Reads a table written by [`write_table`], validating the schema.
pub fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)
        .map_err(|_| CliError::MissingInput(format!("no table at {}", path.display())))?;
    let mut lines = text.lines();
    let found = lines.next().unwrap_or("");
    if found != header {
        return Err(CliError::Config(format!(
            "{}: schema drift — header is '{found}', this tool expects '{header}'",
            path.display()
        )));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != width {
            return Err(CliError::Config(format!(
                "{} line {}: {} fields where the schema has {width}",
                path.display(),
                i + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Parses a float field that was written by this tool.
pub fn parse_f64(field: &str, path: &Path) -> Result<f64> {
    field.parse().map_err(|_| {
        CliError::Config(format!(
            "{}: '{field}' is not a number",
            path.display()
        ))
    })
}

/// Parses an integer field that was written by this tool.
pub fn parse_usize(field: &str, path: &Path) -> Result<usize> {
    field.parse().map_err(|_| {
        CliError::Config(format!(
            "{}: '{field}' is not a count",
            path.display()
        ))
    })
}

/// Shortest round-trip rendering of a float (`1.0` stays distinguishable
/// from `1`): integral values keep one decimal.
pub fn fmt_f64(x: f64) -> String {
    if x.fract() == 0.0 && x.is_finite() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}
