//! Output files: atomic writes, content hashes and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io = |e: std::io::Error| Failure::Io(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Provenance of one CLI run, written as `manifest.json` beside the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<OutputRecord>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

/// Collects outputs of a run into a directory and finalizes the manifest.
pub struct RunOutput {
    dir: PathBuf,
    manifest: RunManifest,
}

impl RunOutput {
    pub fn create(
        dir: &Path,
        command: &str,
        config_path: &Path,
        config_bytes: &[u8],
    ) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Io(format!("creating {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_path: config_path.display().to_string(),
                config_sha256: sha256_hex(config_bytes),
                parameters: BTreeMap::new(),
                outputs: Vec::new(),
                started_unix: unix_now(),
                finished_unix: 0.0,
            },
        })
    }

    pub fn param<T: Serialize>(&mut self, name: &str, value: T) {
        let v = serde_json::to_value(value).expect("parameter serializes");
        self.manifest.parameters.insert(name.to_string(), v);
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(file);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.push(OutputRecord {
            file: file.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        self.write(file, text.as_bytes())
    }

    pub fn finish(mut self) -> Result<RunManifest, Failure> {
        self.manifest.finished_unix = unix_now();
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(self.manifest)
    }
}
