use std::path::{Path, PathBuf};

use ethseq::trainer::config_hash;
use ethseq::Result;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every stage's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    /// Hash of the subcommand, seed and resolved config.
    pub config_hash: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &str, seed: u64, threads: usize, config: &C) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        let config_hash = config_hash(&(subcommand, seed, &config));
        RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            config_hash,
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::data::write_json(&dir.join(MANIFEST_FILE), self)
    }
}
