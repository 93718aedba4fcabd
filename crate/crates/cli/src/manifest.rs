//! Provenance record written next to every CSV.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, replayable as-is.
    pub args: Vec<String>,
    pub config_paths: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    /// SHA-256 over the arguments and the bytes of every config file.
    pub input_hash: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], config_paths: &[PathBuf], seeds: &[u64]) -> Result<Self, CliError> {
        Ok(Self {
            command: command.to_string(),
            args: args.to_vec(),
            config_paths: config_paths.to_vec(),
            seeds: seeds.to_vec(),
            input_hash: input_hash(args, config_paths)?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Input { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Fails when a config file changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<(), CliError> {
        let now = input_hash(&self.args, &self.config_paths)?;
        if now != self.input_hash {
            return Err(CliError::Usage(format!(
                "inputs changed since the manifest was written (hash {} != {})",
                now, self.input_hash
            )));
        }
        Ok(())
    }
}

fn input_hash(args: &[String], config_paths: &[PathBuf]) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    for arg in args {
        hasher.update((arg.len() as u64).to_le_bytes());
        hasher.update(arg.as_bytes());
    }
    for path in config_paths {
        let bytes = std::fs::read(path)?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `out.csv` -> `out.manifest.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}
