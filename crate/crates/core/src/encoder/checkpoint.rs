//! Checkpoint container.
//!
//! A checkpoint is a single JSON document:
//!
//! ```text
//! {
//!   "format": "physreg-checkpoint",
//!   "version": 1,
//!   "epoch": <last completed epoch, 0-based>,
//!   "val_loss": <validation loss after that epoch>,
//!   "best_val_loss": <running minimum of val_loss>,
//!   "params": {"shape": {...}, "w1": [...], "b1": [...], "w2": [...], "b2": [...]},
//!   "optimizer": {"learning_rate", "step", "m": <params>, "v": <params>},
//!   "bank": {"capacity", "entries": [{"key", "traj", "label", "embedding"}]}
//! }
//! ```
//!
//! Weights are row-major `out x in`. Reals are written in shortest
//! round-trip decimal form, so a reload is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bank::MemoryBank;
use super::model::EncoderParams;
use super::optim::Adam;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "physreg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub epoch: usize,
    pub val_loss: f64,
    pub best_val_loss: f64,
    pub params: EncoderParams,
    pub optimizer: Adam,
    pub bank: MemoryBank,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ck.format, ck.version
            )));
        }
        ck.params.check_shape()?;
        ck.optimizer.m.check_shape()?;
        ck.optimizer.v.check_shape()?;
        Ok(ck)
    }
}
