//! End-of-epoch checkpoints: a JSON document wrapping the full curriculum state.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::CurriculumState;
use crate::error::{DdscError, Result};

pub const CHECKPOINT_FORMAT: &str = "ddsc-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub strategy: String,
    pub state: CurriculumState,
}

impl Checkpoint {
    pub fn new(strategy: impl Into<String>, state: CurriculumState) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            strategy: strategy.into(),
            state,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| DdscError::UnreadableCheckpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(DdscError::UnreadableCheckpoint(format!(
                "unsupported format {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        if ckpt.state.ledger.is_empty() {
            return Err(DdscError::UnreadableCheckpoint("empty ledger".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DdscError::UnreadableCheckpoint(e.to_string()))?;
        Self::from_json(&text)
    }
}
