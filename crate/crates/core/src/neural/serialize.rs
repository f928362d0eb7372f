//! Versioned JSON persistence for trained models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ScalerParams;
use crate::error::{Error, Result};

use super::types::{Hyperparameters, LayerWeights, LstmModel};

/// Bumped whenever the on-disk layout changes incompatibly.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    hyperparameters: Hyperparameters,
    input_dim: usize,
    layers: Vec<LayerWeights>,
    w_out: Vec<f64>,
    b_out: f64,
    scaler: Option<ScalerParams>,
}

/// Serializes a model to pretty-printed JSON. Finite weights survive the
/// round trip bit-exactly (shortest-representation float formatting).
pub fn model_to_json(model: &LstmModel) -> Result<String> {
    model.validate()?;
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        hyperparameters: model.hp.clone(),
        input_dim: model.input_dim(),
        layers: model.layers.clone(),
        w_out: model.w_out.clone(),
        b_out: model.b_out,
        scaler: model.scaler.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Internal(format!("model serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(json: &str, origin: &str) -> Result<LstmModel> {
    let file: ModelFile = serde_json::from_str(json)
        .map_err(|e| Error::parse(origin, e.line(), e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::parse(
            origin,
            1,
            format!(
                "unsupported model format version {} (this build reads version {})",
                file.format_version, MODEL_FORMAT_VERSION
            ),
        ));
    }
    let model = LstmModel {
        layers: file.layers,
        w_out: file.w_out,
        b_out: file.b_out,
        hp: file.hyperparameters,
        scaler: file.scaler,
    };
    model.validate()?;
    if model.input_dim() != file.input_dim {
        return Err(Error::parse(
            origin,
            1,
            format!(
                "declared input_dim {} does not match layer shapes ({})",
                file.input_dim,
                model.input_dim()
            ),
        ));
    }
    Ok(model)
}

pub fn save_model(model: &LstmModel, path: &Path) -> Result<()> {
    let json = model_to_json(model)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<LstmModel> {
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&json, &path.display().to_string())
}
