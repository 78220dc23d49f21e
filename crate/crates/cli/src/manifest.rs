//! Run manifest written next to every command's outputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Provenance record for one run directory. Timestamps are wall-clock
/// metadata; everything else is deterministic for a given config and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn begin(config_hash: String, seed: u64) -> RunManifest {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seed,
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn finish(mut self, outputs: Vec<String>, dir: &Path) -> Result<()> {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        self.outputs = outputs;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}
