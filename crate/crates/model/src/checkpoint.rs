//! Model persistence: a single JSON file holding the configuration, the
//! vocabulary geometry, and every parameter tensor by name.
//!
//! Values round-trip bit-exactly: floats are serialized with full precision,
//! so a saved model reloads to identical parameters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fsns_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::model::SubsetEmbeddingModel;

/// Format tag written into every checkpoint file.
pub const CHECKPOINT_FORMAT: &str = "fsns-subset-model/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: ModelConfig,
    n_features: usize,
    max_positions: usize,
    params: BTreeMap<String, TensorData>,
}

/// Write a model to `path` as JSON.
pub fn save_checkpoint(model: &SubsetEmbeddingModel, path: &Path) -> Result<()> {
    let mut params = BTreeMap::new();
    for param in model.params() {
        params.insert(
            param.name.clone(),
            TensorData {
                rows: param.tensor.rows(),
                cols: param.tensor.cols(),
                data: param.tensor.as_slice().to_vec(),
            },
        );
    }
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        config: model.config.clone(),
        n_features: model.n_features,
        max_positions: model.max_positions,
        params,
    };
    let body = serde_json::to_string(&file)?;
    fs::write(path, body).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rebuild a model from a checkpoint file written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<SubsetEmbeddingModel> {
    let body = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: CheckpointFile = serde_json::from_str(&body)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(ModelError::UnknownFormat(file.format));
    }
    let mut model = SubsetEmbeddingModel::new(file.config, file.n_features, file.max_positions)?;
    let mut stored = file.params;
    for param in model.params_mut() {
        let Some(tensor) = stored.remove(&param.name) else {
            return Err(ModelError::MissingParam(param.name.clone()));
        };
        let want_rows = param.tensor.rows();
        let want_cols = param.tensor.cols();
        if tensor.rows != want_rows || tensor.cols != want_cols {
            return Err(ModelError::ShapeMismatch {
                name: param.name.clone(),
                want_rows,
                want_cols,
                got_rows: tensor.rows,
                got_cols: tensor.cols,
            });
        }
        param.tensor = Tensor::from_vec(tensor.rows, tensor.cols, tensor.data);
    }
    if let Some(name) = stored.into_keys().next() {
        return Err(ModelError::UnexpectedParam(name));
    }
    Ok(model)
}
