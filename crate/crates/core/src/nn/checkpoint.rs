use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::MLPParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned on-disk record of a network: all matrices, batch-norm
/// statistics, and (optionally) optimizer state. JSON with shortest
/// round-trip float formatting, so reloading is bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub version: u32,
    pub net: MLPParams,
    pub optimizer: Option<AdamState>,
}

pub fn save_mlp(path: &Path, net: &MLPParams, optimizer: Option<&AdamState>) -> Result<()> {
    let record = MlpCheckpoint {
        version: CHECKPOINT_VERSION,
        net: net.clone(),
        optimizer: optimizer.cloned(),
    };
    let file = File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), &record)?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<(MLPParams, Option<AdamState>)> {
    let file = File::open(path)?;
    let record: MlpCheckpoint = serde_json::from_reader(BufReader::new(file))?;
    if record.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint version {}",
            record.version
        )));
    }
    Ok((record.net, record.optimizer))
}
