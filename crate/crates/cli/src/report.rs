//! CSV and manifest emission.
//!
//! CSV files are RFC-4180 with a mandatory header row; floats carry 9
//! significant digits. The manifest records enough to reproduce a run:
//! the resolved configuration, its content hash, and the master seed.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// A float with 9 significant digits, stable across platforms.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.8e}")
}

pub struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        CsvTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)
            .with_context(|| format!("cannot open {} for writing", path.display()))?;
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Writes `<out>.manifest.json` next to an output file.
pub fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    threads: Option<usize>,
    resolved_config: &Value,
    started: Instant,
) -> Result<()> {
    let config_bytes = serde_json::to_vec(resolved_config)?;
    let content_hash = hex::encode(Sha256::digest(&config_bytes));
    let manifest = json!({
        "command": command,
        "seed": seed,
        "threads": threads,
        "config": resolved_config,
        "content_hash": content_hash,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let path = manifest_path(out);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
