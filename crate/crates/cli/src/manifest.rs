//! Model directory manifest with content hashes.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use coldpack::io::{read_json, write_json};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::sha256_hex;

pub const MODEL_MANIFEST: &str = "manifest.json";
pub const VAL_MANIFEST: &str = "val_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub data: PathBuf,
    pub as_of: NaiveDate,
    pub training_bookings: usize,
    pub artifacts: Vec<ArtifactEntry>,
    pub config: RunConfig,
}

impl ModelManifest {
    pub fn new(
        data: &Path,
        as_of: NaiveDate,
        training_bookings: usize,
        artifacts: &[(&str, Vec<u8>)],
        config: &RunConfig,
    ) -> Self {
        Self {
            format_version: 1,
            data: data.to_path_buf(),
            as_of,
            training_bookings,
            artifacts: artifacts
                .iter()
                .map(|(name, bytes)| ArtifactEntry {
                    name: name.to_string(),
                    sha256: sha256_hex(bytes),
                    bytes: bytes.len(),
                })
                .collect(),
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        Ok(write_json(&dir.join(MODEL_MANIFEST), self)?)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_MANIFEST);
        read_json(&path).with_context(|| format!("reading {}", path.display()))
    }

    /// Rehashes every artifact on disk; returns the names that differ.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            if sha256_hex(&bytes) != a.sha256 {
                bad.push(a.name.clone());
            }
        }
        Ok(bad)
    }
}

/// Validation split for `tune`: the model must be fitted up to `cutoff`;
/// weights are tuned on bookings in `(cutoff, cutoff + horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationManifest {
    pub data: PathBuf,
    pub cutoff: NaiveDate,
    pub horizon: i64,
}
