//! Run manifests: everything needed to reproduce a run and find its outputs.

use super::config::RunConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub config: RunConfig,
    pub dataset: Option<PathBuf>,
    pub dataset_sha256: Option<String>,
    pub parent_checkpoint: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            version: crate::VERSION.to_string(),
            command: command.to_string(),
            seed: config.train.seed,
            threads: rayon::current_num_threads(),
            deterministic: false,
            config: config.clone(),
            dataset: None,
            dataset_sha256: None,
            parent_checkpoint: None,
            checkpoints: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
