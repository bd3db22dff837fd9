//! Run manifest: enough to reproduce every output file.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub oracle_cap: usize,
    pub ssf_cli_version: String,
    pub ssf_core_version: String,
    /// Set when the command stopped early; listed files may be incomplete.
    pub partial: bool,
    pub messages: Vec<String>,
    pub files: Vec<FileEntry>,
    /// Effective configuration after command-line overrides.
    pub config: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::write(dir.join("manifest.toml"), toml::to_string(self)?)?;
        Ok(())
    }
}

pub fn file_entry(path: &Path) -> anyhow::Result<FileEntry> {
    let bytes = std::fs::read(path)?;
    Ok(FileEntry {
        name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: sha256_hex(&bytes),
    })
}
