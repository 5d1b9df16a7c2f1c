use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Everything needed to rerun a command: written next to each artifact as
/// `<artifact>.manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub dataset_sha256: Option<String>,
    pub tool_version: String,
    pub timings_s: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            config: serde_json::to_value(config).context("serializing config")?,
            seed: None,
            dataset_sha256: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timings_s: BTreeMap::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn time(&mut self, name: &str, seconds: f64) {
        self.timings_s.insert(name.to_string(), seconds);
    }

    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut s = artifact.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    /// Writes one manifest beside every recorded artifact.
    pub fn write_all(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        for a in &self.artifacts {
            let p = Self::path_for(a);
            std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }
}
