//! Versioned model checkpoints. JSON keeps the format inspectable; floats
//! round-trip bit-exactly through the shortest-representation encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{CtganModel, Fitted, GaussianCopulaModel, TvaeModel};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelPayload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelPayload {
    Copula(GaussianCopulaModel),
    Ctgan(CtganModel),
    Tvae(TvaeModel),
}

impl Checkpoint {
    pub fn new(model: ModelPayload) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            model,
        }
    }

    pub fn into_fitted(self) -> Box<dyn Fitted> {
        match self.model {
            ModelPayload::Copula(m) => Box::new(m),
            ModelPayload::Ctgan(m) => Box::new(m),
            ModelPayload::Tvae(m) => Box::new(m),
        }
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let text = serde_json::to_string(checkpoint)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            checkpoint.version
        )));
    }
    Ok(checkpoint)
}
