//! On-disk feature files.
//!
//! A JSON manifest names two sibling payloads: features as little-endian
//! `f32`, row-major, exactly `n·d·4` bytes, and labels as little-endian
//! `u32`, `n·4` bytes. Files ending in `.csv` are read as
//! `label,f0,…,f{d−1}` rows instead.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureDataset, Split};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureManifest {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub dtype: String,
    pub label_file: String,
    pub feature_file: String,
}

/// Writes `<stem>.features.bin`, `<stem>.labels.bin` and the manifest at
/// `manifest_path`.
pub fn save_features(ds: &FeatureDataset, manifest_path: &Path) -> Result<FeatureManifest> {
    let dir = parent_dir(manifest_path);
    let stem = manifest_path.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
    let manifest = FeatureManifest {
        version: FORMAT_VERSION,
        n: ds.n,
        d: ds.d,
        dtype: "f32".into(),
        label_file: format!("{stem}.labels.bin"),
        feature_file: format!("{stem}.features.bin"),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let features: Vec<u8> = ds.features.iter().flat_map(|x| x.to_le_bytes()).collect();
    let labels: Vec<u8> = ds.labels.iter().flat_map(|x| x.to_le_bytes()).collect();
    write_file(&dir.join(&manifest.feature_file), &features)?;
    write_file(&dir.join(&manifest.label_file), &labels)?;
    write_file(manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Loads a feature file from a JSON manifest or a CSV file.
pub fn load_features(path: &Path) -> Result<FeatureDataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return load_csv(path);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: FeatureManifest = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::UnknownVersion(manifest.version));
    }
    if manifest.dtype != "f32" {
        return Err(Error::UnsupportedDtype(manifest.dtype));
    }
    let dir = parent_dir(path);
    let feature_bytes = read_sized(&dir.join(&manifest.feature_file), (manifest.n * manifest.d * 4) as u64)?;
    let label_bytes = read_sized(&dir.join(&manifest.label_file), (manifest.n * 4) as u64)?;
    let features: Vec<f32> = feature_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let labels: Vec<u32> = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    FeatureDataset::new(manifest.d, features, labels, Split::Train)
}

fn load_csv(path: &Path) -> Result<FeatureDataset> {
    let malformed = |message: String| Error::Malformed {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("label") {
        return Err(malformed("first column must be `label`".into()));
    }
    let d = headers.len() - 1;
    for (k, h) in headers.iter().skip(1).enumerate() {
        if h != format!("f{k}") {
            return Err(malformed(format!("column {} should be f{k}, found {h:?}", k + 1)));
        }
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 1 {
            return Err(malformed(format!(
                "line {line}: expected {} fields, found {}",
                d + 1,
                record.len()
            )));
        }
        labels.push(
            record[0]
                .trim()
                .parse::<u32>()
                .map_err(|e| malformed(format!("line {line}: label: {e}")))?,
        );
        for field in record.iter().skip(1) {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|e| malformed(format!("line {line}: {e}")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite { index: features.len() });
            }
            features.push(v);
        }
    }
    FeatureDataset::new(d, features, labels, Split::Train)
}

/// Little-endian `f64` payload; used for checkpoint tensors.
pub fn write_tensor_f64(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|x| x.to_le_bytes()).collect();
    write_file(path, &bytes)
}

pub fn read_tensor_f64(path: &Path, len: usize) -> Result<Vec<f64>> {
    let bytes = read_sized(path, (len * 8) as u64)?;
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(index) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(values)
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_sized(path: &Path, expected: u64) -> Result<Vec<u8>> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes)
}
