use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{load_json, write_json};
use crate::error::Result;

/// Everything needed to rerun a command: the fully resolved configuration,
/// the seed actually used and where inputs and outputs live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub master_seed: u64,
    pub version: String,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Value, master_seed: u64, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config,
            master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            outputs,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        load_json(path)
    }
}

/// `results.csv` → `results.manifest.json`.
pub fn default_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
