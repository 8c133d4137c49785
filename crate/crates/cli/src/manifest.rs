//! Run manifests: what was run, with which configuration and inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub versions: BTreeMap<&'static str, String>,
    pub seed: u64,
    pub config_sha256: String,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<PathBuf>,
    /// Output fields that depend on the machine rather than the inputs.
    pub nondeterministic_fields: Vec<&'static str>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, seed: u64, config: &T) -> CliResult<Self> {
        let text = serde_json::to_string(config).map_err(|e| crate::error::Failure::Run(e.to_string()))?;
        let value = serde_json::from_str(&text).map_err(|e| crate::error::Failure::Run(e.to_string()))?;
        let mut versions = BTreeMap::new();
        versions.insert("citlab", env!("CARGO_PKG_VERSION").to_string());
        versions.insert("manifest", "1".to_string());
        Ok(Self {
            command: command.into(),
            versions,
            seed,
            config_sha256: sha256_hex(text.as_bytes()),
            config: value,
            inputs: Vec::new(),
            outputs: Vec::new(),
            nondeterministic_fields: vec!["seconds"],
        })
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = fs::read(path)?;
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| crate::error::Failure::Run(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
