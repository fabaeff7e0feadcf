//! Run artifacts. Each file is written to a temporary name and renamed into
//! place; `manifest.json` goes last, so its presence marks a complete run.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anderson_spectra::config::ExperimentConfig;
use anderson_spectra::ensemble::{EnsembleSummary, ExperimentOutput, Table};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub master_seed: u64,
    pub workers: usize,
    /// Normalized effective config, one `key = value` per line.
    pub config: String,
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
    pub wall_seconds: f64,
    /// sha256 of `summary.json`.
    pub summary_digest: String,
}

pub fn summary_json(summary: &EnsembleSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Integral values print without a fractional part, everything else in
/// shortest round-trip form.
fn cell(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

pub fn table_csv(table: &Table) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| cell(*v)))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput, elapsed: Duration) -> io::Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let summary = summary_json(&out.summary);
    let mut files: Vec<(String, Vec<u8>)> = vec![("summary.json".into(), summary.into_bytes()), ("data.csv".into(), table_csv(&out.data)?)];
    for (name, table) in &out.extra {
        files.push((name.clone(), table_csv(table)?));
    }

    let mut artifacts = Vec::new();
    for (name, bytes) in &files {
        write_atomic(&dir.join(name), bytes)?;
        artifacts.push(Artifact { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }
    let manifest = RunManifest {
        experiment: cfg.experiment.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.seed,
        workers: cfg.workers,
        config: cfg.normalized(),
        config_hash: cfg.content_hash(),
        summary_digest: artifacts[0].sha256.clone(),
        artifacts,
        wall_seconds: elapsed.as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}
