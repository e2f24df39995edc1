//! Run manifest written next to every stage's outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use physreg_core::config::ExperimentConfig;
use physreg_core::encoder::{ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConstants {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub optimizer: OptimizerConstants,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p)? })).collect()
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: ExperimentConfig,
    started: u64,
}

impl ManifestBuilder {
    pub fn start(command: &str, seed: u64, config: &ExperimentConfig) -> Self {
        ManifestBuilder { command: command.into(), seed, config: config.clone(), started: now_unix() }
    }

    /// Writes `run_manifest.<command>.json` into `dir` and returns its path.
    pub fn finish(self, dir: &Path, inputs: &[PathBuf], outputs: &[PathBuf]) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            seed: self.seed,
            config: self.config,
            optimizer: OptimizerConstants { beta1: ADAM_BETA1, beta2: ADAM_BETA2, epsilon: ADAM_EPSILON },
            inputs: digests(inputs)?,
            outputs: digests(outputs)?,
            started_unix: self.started,
            finished_unix: now_unix(),
        };
        let path = dir.join(format!("run_manifest.{}.json", self.command));
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
