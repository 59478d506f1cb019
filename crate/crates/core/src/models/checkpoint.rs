//! Two-file checkpoints: a JSON manifest and a raw little-endian `f32` blob.
//!
//! The manifest records `format_version`, the model kind and spec, and one
//! entry per tensor (`name`, `shape`, byte `offset`, byte `length`). The blob
//! holds the tensors row-major, concatenated in manifest order. The blob
//! path is the manifest path with its extension replaced by `bin`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AutoEncoder, AutoEncoderSpec, Classifier, ClassifierSpec, Finetuned, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Any persistable model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Classifier(Classifier),
    AutoEncoder(AutoEncoder),
}

impl Model {
    fn kind(&self) -> &'static str {
        match self {
            Model::Classifier(_) => "classifier",
            Model::AutoEncoder(_) => "autoencoder",
        }
    }

    fn params(&self) -> &ParamSet {
        match self {
            Model::Classifier(m) => m.params(),
            Model::AutoEncoder(m) => m.params(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "spec", rename_all = "snake_case")]
enum SpecRecord {
    Classifier(ClassifierSpec),
    Autoencoder(AutoEncoderSpec),
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    length: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    #[serde(flatten)]
    spec: SpecRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    finetuned: Option<Finetuned>,
    blob: String,
    checksum: String,
    tensors: Vec<TensorEntry>,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let params = model.params();
    let mut tensors = Vec::with_capacity(params.len());
    let mut offset = 0;
    for (name, t) in params.iter() {
        let length = t.len() * 4;
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
            length,
        });
        offset += length;
    }
    let blob = blob_path(path);
    let (spec, finetuned) = match model {
        Model::Classifier(m) => (SpecRecord::Classifier(m.spec().clone()), None),
        Model::AutoEncoder(m) => (SpecRecord::Autoencoder(m.spec().clone()), m.finetuned()),
    };
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        spec,
        finetuned,
        blob: blob
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        checksum: params.checksum(),
        tensors,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&blob, params.to_le_bytes()).map_err(|e| Error::io(&blob, e))?;
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CheckpointManifest("missing format_version".into()))?;
    if found != CHECKPOINT_VERSION as u64 {
        return Err(Error::CheckpointVersion {
            found: found as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    let blob_file = path.with_file_name(&manifest.blob);
    let bytes = fs::read(&blob_file).map_err(|e| Error::io(&blob_file, e))?;

    let declared: usize = manifest.tensors.iter().map(|t| t.length).sum();
    if bytes.len() < declared {
        let complete = manifest
            .tensors
            .iter()
            .filter(|t| t.offset + t.length <= bytes.len())
            .count();
        return Err(Error::CheckpointTruncated(format!(
            "manifest declares {} tensors ({declared} bytes), blob holds {complete} complete tensors ({} bytes)",
            manifest.tensors.len(),
            bytes.len()
        )));
    }

    // a freshly built model supplies the expected names and shapes
    let template = match &manifest.spec {
        SpecRecord::Classifier(s) => Model::Classifier(Classifier::build(s.clone(), 0)?),
        SpecRecord::Autoencoder(s) => Model::AutoEncoder(AutoEncoder::build(s.clone(), 0)?),
    };
    let expected = template.params();
    if expected.len() != manifest.tensors.len() {
        return Err(Error::CheckpointManifest(format!(
            "spec implies {} tensors, manifest lists {}",
            expected.len(),
            manifest.tensors.len()
        )));
    }
    let mut params = ParamSet::new();
    for ((name, want), entry) in expected.iter().zip(&manifest.tensors) {
        let count: usize = entry.shape.iter().product();
        if entry.name != name || entry.shape != want.shape() || entry.length != count * 4 {
            return Err(Error::CheckpointManifest(format!(
                "tensor `{}` {:?} ({} bytes) where the spec expects `{name}` {:?}",
                entry.name,
                entry.shape,
                entry.length,
                want.shape()
            )));
        }
        let data = bytes[entry.offset..entry.offset + entry.length]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        params.push(name, Tensor::new(entry.shape.clone(), data)?);
    }
    Ok(match manifest.spec {
        SpecRecord::Classifier(s) => Model::Classifier(Classifier::from_parts(s, params)),
        SpecRecord::Autoencoder(s) => {
            Model::AutoEncoder(AutoEncoder::from_parts(s, params, manifest.finetuned))
        }
    })
}

pub fn load_classifier(path: &Path) -> Result<Classifier> {
    match load_checkpoint(path)? {
        Model::Classifier(m) => Ok(m),
        other => Err(Error::CheckpointKind {
            expected: "classifier".into(),
            found: other.kind().into(),
        }),
    }
}

pub fn load_autoencoder(path: &Path) -> Result<AutoEncoder> {
    match load_checkpoint(path)? {
        Model::AutoEncoder(m) => Ok(m),
        other => Err(Error::CheckpointKind {
            expected: "autoencoder".into(),
            found: other.kind().into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        let clf = Classifier::build(ClassifierSpec::cnn(3, 50, 2), 9).unwrap();
        save_checkpoint(&Model::Classifier(clf.clone()), &path).unwrap();
        let back = load_classifier(&path).unwrap();
        assert_eq!(back, clf);
        let x = Tensor::full(&[2, 3, 50], 0.3);
        assert_eq!(back.logits(&x).unwrap(), clf.logits(&x).unwrap());
    }

    #[test]
    fn truncated_blob_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.json");
        let ae = AutoEncoder::build(AutoEncoderSpec::new(3, 50), 1).unwrap();
        save_checkpoint(&Model::AutoEncoder(ae), &path).unwrap();
        let blob = blob_path(&path);
        let bytes = fs::read(&blob).unwrap();
        // drop the final tensor (dec2.bias, 3 values)
        fs::write(&blob, &bytes[..bytes.len() - 12]).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, Error::CheckpointTruncated(_)), "{err}");
        assert!(err.to_string().contains("declares 8 tensors"), "{err}");
    }

    #[test]
    fn kind_version_and_manifest_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        let clf = Classifier::build(ClassifierSpec::cnn(3, 50, 2), 9).unwrap();
        save_checkpoint(&Model::Classifier(clf), &path).unwrap();
        assert!(matches!(
            load_autoencoder(&path),
            Err(Error::CheckpointKind { .. })
        ));

        let text = fs::read_to_string(&path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["format_version"] = 99.into();
        fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointVersion { found: 99, .. })
        ));

        v["format_version"] = 1.into();
        v["tensors"][0]["shape"] = serde_json::json!([16, 3, 4]);
        v["tensors"][0]["length"] = (16 * 3 * 4 * 4).into();
        fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointManifest(_))
        ));
    }
}
