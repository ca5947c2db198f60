//! Run manifests, file digests, and atomic writes.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tabmae::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// One manifest per command run: what ran, on which inputs (by digest),
/// with which effective config, producing which outputs (by digest).
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub master_seed: u64,
    pub jobs: usize,
    pub effective_config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Writes via a temp file in the same directory plus rename, so interrupted
/// runs never leave truncated outputs.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    let tmp: PathBuf = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(format!(".tmp.{}", std::process::id()));
        path.with_file_name(name)
    };
    std::fs::write(&tmp, bytes).map_err(|e| Error::Io {
        path: tmp.display().to_string(),
        source: e,
    })?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Collects a run's bookkeeping and writes `<first output>.manifest.json`.
pub struct ManifestBuilder {
    started: u128,
    seed: u64,
    jobs: usize,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl ManifestBuilder {
    pub fn new(seed: u64, jobs: usize) -> Self {
        ManifestBuilder {
            started: now_ms(),
            seed,
            jobs,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn set_config(&mut self, config: serde_json::Value) {
        self.config = config;
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Atomically writes an output file and records its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        atomic_write(path, bytes)?;
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: hex_digest(bytes),
        });
        Ok(())
    }

    /// Writes the manifest next to the primary output.
    pub fn finish(self, primary_output: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: std::env::args().collect(),
            master_seed: self.seed,
            jobs: self.jobs,
            effective_config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
        };
        let mut name = primary_output
            .file_name()
            .unwrap_or_default()
            .to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        atomic_write(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())
    }
}
