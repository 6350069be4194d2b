use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::head::{HeadDims, ProjectionHead, PARAM_NAMES};
use crate::data::{read_tensor_f64, write_tensor_f64, FORMAT_VERSION};
use crate::error::{Error, Result};

pub const CHECKPOINT_MANIFEST: &str = "checkpoint.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    file: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest {
    version: u32,
    dtype: String,
    dims: HeadDims,
    dropout_rate: f64,
    step: u64,
    optimizer: AdamConfig,
    tensors: Vec<TensorEntry>,
}

/// Writes head parameters and Adam moments into `dir`.
pub fn save_checkpoint(dir: &Path, head: &ProjectionHead, adam: &AdamState) -> Result<()> {
    if adam.shapes() != head.dims().shapes() {
        return Err(Error::Contract("optimizer state does not match head shapes".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tensors = Vec::new();
    let groups = head
        .params()
        .into_iter()
        .zip(PARAM_NAMES)
        .map(|(v, n)| (n.to_string(), v))
        .chain(
            adam.first_moment
                .iter()
                .zip(PARAM_NAMES)
                .map(|(v, n)| (format!("adam_m.{n}"), v.as_slice())),
        )
        .chain(
            adam.second_moment
                .iter()
                .zip(PARAM_NAMES)
                .map(|(v, n)| (format!("adam_v.{n}"), v.as_slice())),
        );
    for (name, values) in groups {
        let file = format!("{name}.bin");
        write_tensor_f64(&dir.join(&file), values)?;
        tensors.push(TensorEntry {
            name,
            file,
            len: values.len(),
        });
    }
    let manifest = CheckpointManifest {
        version: FORMAT_VERSION,
        dtype: "f64".into(),
        dims: head.dims(),
        dropout_rate: head.dropout_rate(),
        step: adam.step,
        optimizer: adam.config,
        tensors,
    };
    let path = dir.join(CHECKPOINT_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<(ProjectionHead, AdamState)> {
    let path = dir.join(CHECKPOINT_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::UnknownVersion(manifest.version));
    }
    if manifest.dtype != "f64" {
        return Err(Error::UnsupportedDtype(manifest.dtype));
    }
    let load = |name: String, len: usize| -> Result<Vec<f64>> {
        let entry = manifest
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Malformed {
                path: path.clone(),
                message: format!("missing tensor {name}"),
            })?;
        if entry.len != len {
            return Err(Error::Shape {
                expected: len,
                actual: entry.len,
            });
        }
        read_tensor_f64(&dir.join(&entry.file), len)
    };
    let shapes = manifest.dims.shapes();
    let mut params = Vec::with_capacity(4);
    let mut first = Vec::with_capacity(4);
    let mut second = Vec::with_capacity(4);
    for (name, len) in PARAM_NAMES.iter().zip(shapes) {
        params.push(load(name.to_string(), len)?);
        first.push(load(format!("adam_m.{name}"), len)?);
        second.push(load(format!("adam_v.{name}"), len)?);
    }
    let params: [Vec<f64>; 4] = params.try_into().expect("four groups");
    let head = ProjectionHead::from_parts(manifest.dims, manifest.dropout_rate, params)?;
    let adam = AdamState {
        config: manifest.optimizer,
        first_moment: first,
        second_moment: second,
        step: manifest.step,
    };
    Ok((head, adam))
}
