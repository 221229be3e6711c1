//! Versioned textual checkpoints: a JSON dump of every parameter tensor with
//! its shape, plus the training step counter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::net::ModelParams;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    params: ModelParams,
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    params.validate()?;
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        params: params.clone(),
    };
    let body = serde_json::to_string_pretty(&checkpoint)
        .map_err(|e| Error::InvalidValue(format!("checkpoint serialization failed: {e}")))?;
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let checkpoint: Checkpoint = serde_json::from_str(&body).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: format!("invalid checkpoint JSON: {e}"),
    })?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                checkpoint.version
            ),
        });
    }
    let params = checkpoint.params;
    params.validate()?;
    let expected_cls = params.feature_channels * params.num_classes;
    if params.classifier_weights.len() != expected_cls
        || params.classifier_bias.len() != params.num_classes
    {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "checkpoint tensor shapes are inconsistent".into(),
        });
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let params = ModelParams::init(1, 8, 4, 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&params, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(params, loaded);
    }

    #[test]
    fn corrupt_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"version\": 1}").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
