use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{atomic_write, IoError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub outputs: Vec<PathBuf>,
    pub seconds: f64,
}

/// Provenance of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the config file bytes, hex.
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8], seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages: Vec::new(),
        }
    }

    /// Runs `f`, recording its outputs and wall-clock time.
    pub fn stage<T, E>(&mut self, name: &str, f: impl FnOnce() -> Result<(T, Vec<PathBuf>), E>) -> Result<T, E> {
        let t0 = Instant::now();
        let (value, outputs) = f()?;
        self.stages.push(StageRecord {
            stage: name.to_string(),
            outputs,
            seconds: t0.elapsed().as_secs_f64(),
        });
        Ok(value)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        atomic_write(path, json.as_bytes())
    }
}
