//! Run manifests: what is needed to re-execute a run.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{read_json, write_json, ArtifactError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub path: String,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    pub datasets: IndexMap<String, DatasetFingerprint>,
    pub fold_seed: Option<u64>,
    pub backend_id: String,
    pub artifacts: IndexMap<String, String>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, backend_id: impl Into<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            datasets: IndexMap::new(),
            fold_seed: None,
            backend_id: backend_id.into(),
            artifacts: IndexMap::new(),
        }
    }

    pub fn add_dataset(&mut self, role: &str, path: &Path) -> Result<(), ArtifactError> {
        self.datasets.insert(role.to_string(), fingerprint(path)?);
        Ok(())
    }

    pub fn add_artifact(&mut self, role: &str, path: &Path) {
        self.artifacts.insert(role.to_string(), path.display().to_string());
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        read_json(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fingerprint(path: &Path) -> Result<DatasetFingerprint, ArtifactError> {
    let bytes = std::fs::read(path).map_err(|source| ArtifactError::Io { path: path.display().to_string(), source })?;
    Ok(DatasetFingerprint { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}
