use std::path::{Path, PathBuf};

use labelaug::sweep::sha256_hex;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct Entry<'a> {
    path: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    files: Vec<Entry<'a>>,
}

/// Files written by one command, recorded in `manifest.json` next to them.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push((name.to_string(), sha256_hex(text.as_bytes())));
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes the manifest and returns every path written, manifest last.
    pub fn finish(mut self, command: &str, config: &Value) -> CliResult<Vec<PathBuf>> {
        let manifest = RunManifest {
            tool: "labelaug",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            files: self.files.iter().map(|(p, h)| Entry { path: p, sha256: h.clone() }).collect(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(self.written)
    }
}
