use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Result};

pub const MANIFEST_FILE: &str = "run-manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

/// Digest of a value's JSON serialization.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes"))
}

/// One executed (or cache-hit) pipeline step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Digest of the step's parameters and input digests.
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    /// Output paths (relative to the output directory) and their digests.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub read_sets: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub cached: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_sha256: String,
    pub steps: BTreeMap<String, StepRecord>,
}

impl RunManifest {
    pub fn new(config_sha256: String) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            steps: BTreeMap::new(),
        }
    }

    /// Loads `dir/run-manifest.json`, or an empty manifest if absent.
    pub fn load_or_new(dir: &Path, config_sha256: &str) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(config_sha256.to_string()));
        }
        let text = fs::read_to_string(&path).map_err(|source| PipelineError::Io {
            path: path.clone(),
            source,
        })?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        m.config_sha256 = config_sha256.to_string();
        m.version = env!("CARGO_PKG_VERSION").to_string();
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
    }

    /// A recorded step is reusable when its key matches and every output
    /// still has its recorded digest.
    pub fn reusable(&self, step: &str, key: &str, dir: &Path) -> Option<&StepRecord> {
        let rec = self.steps.get(step)?;
        if rec.key != key {
            return None;
        }
        let intact = rec
            .outputs
            .iter()
            .all(|(rel, digest)| file_digest(&dir.join(rel)).is_ok_and(|d| &d == digest));
        intact.then_some(rec)
    }
}
