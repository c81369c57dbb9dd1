//! Sweep artifacts: per-cell CSV, per-value aggregate CSV and a manifest.
//!
//! Column names are frozen. Reals use `{:.16e}` (17 significant digits);
//! missing values are empty fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{SweepConfig, SweepResult, METRICS};
use crate::{Error, Result};

pub const RAW_FILE: &str = "raw.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub data_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub rng_scheme: String,
    pub config: SweepConfig,
    pub files: Vec<FileEntry>,
}

fn real(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v:.16e}");
    }
}

/// Keeps error messages inside a single unquoted CSV field.
fn sanitize(msg: &str) -> String {
    msg.chars().map(|c| if matches!(c, ',' | '"' | '\n' | '\r') { ';' } else { c }).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn raw_csv(result: &SweepResult) -> String {
    let mut out = String::from("value_index,value,seed_index,seed,status");
    for m in METRICS {
        let _ = write!(out, ",{m}");
    }
    out.push_str(",error\n");
    for c in &result.cells {
        let _ = write!(out, "{},{:.16e},{},{},{}", c.value_index, c.value, c.seed_index, c.seed, if c.metrics.is_some() { "ok" } else { "failed" });
        let values = c.metrics.as_ref().map(|m| m.values()).unwrap_or([None; 8]);
        for v in values {
            out.push(',');
            real(&mut out, v);
        }
        out.push(',');
        out.push_str(&sanitize(c.error.as_deref().unwrap_or("")));
        out.push('\n');
    }
    out
}

pub fn aggregate_csv(result: &SweepResult) -> String {
    let mut out = String::from("value_index,value,n_ok,n_failed");
    for m in METRICS {
        let _ = write!(out, ",{m}_mean,{m}_std");
    }
    out.push('\n');
    for a in &result.aggregates {
        let _ = write!(out, "{},{:.16e},{},{}", a.value_index, a.value, a.n_ok, a.n_failed);
        for (m, s) in a.mean.iter().zip(&a.std) {
            out.push(',');
            real(&mut out, *m);
            out.push(',');
            real(&mut out, *s);
        }
        out.push('\n');
    }
    out
}

pub fn config_hash(cfg: &SweepConfig) -> Result<String> {
    let text = serde_json::to_string(cfg).map_err(|e| Error::config(format!("cannot serialise config: {e}")))?;
    Ok(sha256_hex(text.as_bytes()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<FileEntry> {
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(FileEntry {
        path: name.to_string(),
        sha256: sha256_hex(text.as_bytes()),
        data_rows: text.lines().count().saturating_sub(1),
    })
}

/// Writes `raw.csv`, `aggregate.csv` and `manifest.json` into `out_dir`.
pub fn aggregate_and_write(result: &SweepResult, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = vec![
        write(dir, RAW_FILE, &raw_csv(result))?,
        write(dir, AGGREGATE_FILE, &aggregate_csv(result))?,
    ];
    let manifest = Manifest {
        tool: "labelaug".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config_hash(&result.config)?,
        rng_scheme: "ChaCha8 keyed by master_seed; cell stream id = (value_index << 32) | seed_index; data drawn from seeds[seed_index]".into(),
        config: result.config.clone(),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::config(format!("cannot serialise manifest: {e}")))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_removes_separators() {
        assert_eq!(sanitize("a,b\n\"c\""), "a;b;;c;");
    }

    #[test]
    fn hash_is_hex() {
        let h = sha256_hex(b"abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
