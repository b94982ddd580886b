//! Report writers: JSON with full seed/config provenance (round-trip exact
//! floats) and CSV summaries at 9 significant digits.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

pub fn json_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("{command}.json"))
}

pub fn csv_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("{command}.csv"))
}

pub fn write_json<T: Serialize>(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    results: &T,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = json_path(out_dir, command);
    let doc = serde_json::json!({
        "command": command,
        "config": config,
        "results": results,
    });
    std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    // a rerunnable flat config carrying the full provenance
    std::fs::write(out_dir.join("run.cfg"), config.to_flat())?;
    Ok(path)
}

/// One row per observable/parameter combination.
pub fn write_csv(
    out_dir: &Path,
    command: &str,
    headers: &[&str],
    rows: &[Vec<String>],
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = csv_path(out_dir, command);
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(headers)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(path)
}

/// 9 significant digits for CSV summaries.
pub fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}
