//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::TwoStageModel;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tpnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'a str,
    version: u32,
    model: &'a TwoStageModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct Owned {
    model: TwoStageModel,
}

pub fn to_json(model: &TwoStageModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { format: CHECKPOINT_FORMAT, version: CHECKPOINT_VERSION, model })?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<TwoStageModel> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("not a checkpoint: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unexpected format `{}`", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    let owned: Owned = serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed model: {e}")))?;
    owned.model.validate()?;
    Ok(owned.model)
}

pub fn save(model: &TwoStageModel, path: &Path) -> Result<()> {
    fs::write(path, to_json(model)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load(path: &Path) -> Result<TwoStageModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    from_json(&text)
}
