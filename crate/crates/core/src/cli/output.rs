//! Output files: atomic writes and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::simulator::EpisodeConfig;

use super::CliError;

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Runtime(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Runtime(format!("renaming to {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the resolved configuration in its canonical JSON form.
pub fn config_hash(config: &EpisodeConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

/// Record of what a command is about to compute, written before any
/// episode starts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub config: EpisodeConfig,
    pub scene_seeds: Vec<u64>,
    pub policies: Vec<String>,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn new(
        command: &'static str,
        config: &EpisodeConfig,
        scene_seeds: Vec<u64>,
        policies: Vec<String>,
        output_dir: &Path,
    ) -> Self {
        Self {
            tool: "nbv",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: config_hash(config),
            config: config.clone(),
            scene_seeds,
            policies,
            output_dir: output_dir.to_path_buf(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))
}
