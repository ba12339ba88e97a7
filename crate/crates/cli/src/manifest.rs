//! Run manifests: config snapshot, timings, results and a checksummed
//! inventory of every file a run produced.

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const RESOLVED_NAME: &str = "config.resolved";

pub struct RunManifest {
    command: String,
    config: Value,
    config_text: String,
    timings: Map<String, Value>,
    diagnostics: Map<String, Value>,
    results: Map<String, Value>,
    files: Vec<PathBuf>,
    dir: PathBuf,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, dir: &Path, config: &crate::config::RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: json!(config.values()),
            config_text: config.to_text(),
            timings: Map::new(),
            diagnostics: Map::new(),
            results: Map::new(),
            files: vec![],
            dir: dir.to_path_buf(),
        }
    }

    pub fn timing(&mut self, name: &str, seconds: f64) {
        self.timings.insert(name.into(), json!(seconds));
    }

    pub fn diagnostic(&mut self, name: &str, v: Value) {
        self.diagnostics.insert(name.into(), v);
    }

    pub fn result(&mut self, name: &str, v: Value) {
        self.results.insert(name.into(), v);
    }

    /// Registers a file written inside the output directory.
    pub fn file(&mut self, name: impl Into<PathBuf>) {
        self.files.push(name.into());
    }

    /// Writes `config.resolved` together with the manifest, so a run that
    /// fails early leaves the previous pair intact.
    pub fn write(&self) -> Result<PathBuf> {
        std::fs::write(self.dir.join(RESOLVED_NAME), &self.config_text)?;
        let mut files = Vec::new();
        for f in std::iter::once(&PathBuf::from(RESOLVED_NAME)).chain(&self.files) {
            let p = self.dir.join(f);
            let len = std::fs::metadata(&p).with_context(|| format!("stat {}", p.display()))?.len();
            files.push(json!({
                "path": f.to_string_lossy(),
                "bytes": len,
                "sha256": sha256_file(&p)?,
            }));
        }
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "timings": self.timings,
            "diagnostics": self.diagnostics,
            "results": self.results,
            "files": files,
        });
        let path = self.dir.join(MANIFEST_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(path)
    }
}

/// Recomputes every checksum listed in a manifest. Returns the number of
/// files checked.
pub fn verify(path: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).context("manifest is not valid JSON")?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let files = doc["files"].as_array().context("manifest has no file list")?;
    let mut bad = Vec::new();
    for f in files {
        let name = f["path"].as_str().context("file entry without path")?;
        let want = f["sha256"].as_str().context("file entry without checksum")?;
        match sha256_file(&dir.join(name)) {
            Ok(got) if got == want => {}
            Ok(_) => bad.push(format!("{name}: checksum mismatch")),
            Err(_) => bad.push(format!("{name}: missing")),
        }
    }
    if !bad.is_empty() {
        bail!("manifest verification failed:\n  {}", bad.join("\n  "));
    }
    Ok(files.len())
}
