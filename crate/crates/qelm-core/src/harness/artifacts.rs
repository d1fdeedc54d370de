//! Run manifests: every artifact directory carries a manifest tying each file
//! to the configuration hash, seed, and split that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::scenario::ScenarioMetrics;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: String,
    pub split: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub repeats: usize,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, files: Vec<FileEntry>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.config_hash.clone(),
            seed: cfg.seed,
            repeats: cfg.repeats,
            files,
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = toml::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_NAME);
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Checks that every listed file exists under the directory.
    pub fn verify_complete(&self, out_dir: &Path) -> Result<()> {
        for entry in &self.files {
            let path = out_dir.join(&entry.path);
            if !path.is_file() {
                return Err(Error::config(format!(
                    "manifest lists {} but the file is missing",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// A completed scenario run: where it lives, the aggregates, the manifest.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub metrics: ScenarioMetrics,
    pub manifest: Manifest,
}
