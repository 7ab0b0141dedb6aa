//! Versioned, self-describing checkpoint container for trained potentials.
//!
//! The payload is JSON with a fixed field order (struct declaration order),
//! so identical models serialize to identical bytes.

use super::{DescriptorPotential, EnsemblePotential};
use serde::{Deserialize, Serialize};

pub const CHECKPOINT_FORMAT: &str = "matscreen-potential";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a potential checkpoint: format {0:?}")]
    WrongFormat(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointModel {
    Descriptor(DescriptorPotential),
    Ensemble(EnsemblePotential),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: CheckpointModel,
}

pub fn save_checkpoint(model: &CheckpointModel) -> String {
    serde_json::to_string(&Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    })
    .expect("checkpoints always serialize")
}

pub fn load_checkpoint(text: &str) -> Result<CheckpointModel, CheckpointError> {
    let ck: Checkpoint = serde_json::from_str(text)?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(CheckpointError::WrongFormat(ck.format));
    }
    if ck.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(ck.version));
    }
    Ok(ck.model)
}
