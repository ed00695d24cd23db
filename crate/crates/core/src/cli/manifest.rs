//! Run manifests: resolved config, artifact hashes and stage timings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Resolved configuration as TOML text.
    pub config: String,
    pub seed: Option<u64>,
    /// File name (relative to the run directory) → sha256 hex.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Stage → wall-clock seconds.
    pub timings: BTreeMap<String, f64>,
    pub completed_stages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl RunManifest {
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.outputs.insert(name.to_string(), hash_file(&dir.join(name))?);
        Ok(())
    }

    pub fn finish_stage(&mut self, stage: &str, started: std::time::Instant) {
        self.timings.insert(stage.to_string(), started.elapsed().as_secs_f64());
        self.completed_stages.push(stage.to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }
}

/// Re-hashes every recorded artifact next to the manifest; any mismatch or
/// missing file is an error naming the artifact.
pub fn verify_manifest(path: &Path) -> Result<usize> {
    let m = RunManifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut bad = Vec::new();
    for (name, want) in m.inputs.iter().chain(&m.outputs) {
        match hash_file(&dir.join(name)) {
            Ok(h) if &h == want => {}
            Ok(_) => bad.push(format!("{name}: hash mismatch")),
            Err(_) => bad.push(format!("{name}: missing")),
        }
    }
    if !bad.is_empty() {
        return Err(Error::config(format!("manifest verification failed: {}", bad.join("; "))));
    }
    Ok(m.inputs.len() + m.outputs.len())
}
