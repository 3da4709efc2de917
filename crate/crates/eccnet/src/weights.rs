//! Portable weight bundle: a JSON manifest plus a blob of little-endian f32.

use std::fs;
use std::path::{Path, PathBuf};

use eccnet_core::backbone::{conv_names, Backbone, BackboneConfig, ConvLayer, Preprocessing, KERNEL_SIZE};
use eccnet_core::Filter;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "weights.bin";
pub const DTYPE: &str = "f32le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into the blob.
    pub offset: u64,
}

impl ManifestEntry {
    pub fn byte_len(&self) -> u64 {
        self.shape.iter().product::<usize>() as u64 * 4
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub entries: Vec<ManifestEntry>,
    pub preprocessing: Preprocessing,
    pub source_note: String,
}

pub fn kernel_entry(layer: &str) -> String {
    format!("{layer}/kernel")
}

pub fn bias_entry(layer: &str) -> String {
    format!("{layer}/bias")
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid manifest: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("layer {layer}: manifest has no entry {entry}")]
    MissingEntry { layer: String, entry: String },
    #[error("entry {name}: dtype {dtype}, expected {DTYPE}")]
    Dtype { name: String, dtype: String },
    #[error("entry {name}: shape {actual:?}, expected {expected}")]
    Shape {
        name: String,
        expected: String,
        actual: Vec<usize>,
    },
    #[error("entry {name}: needs bytes {start}..{end} but the blob has {blob_len}")]
    Truncated {
        name: String,
        start: u64,
        end: u64,
        blob_len: u64,
    },
    #[error("entries {a} and {b} overlap in the blob")]
    Overlap { a: String, b: String },
    #[error("backbone: {0}")]
    Backbone(#[from] eccnet_core::Error),
}

/// A backbone together with where it came from.
#[derive(Clone, Debug)]
pub struct LoadedWeights {
    pub backbone: Backbone,
    pub manifest: WeightManifest,
    /// Hex SHA-256 of the blob.
    pub blob_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<WeightManifest, LoadError> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|source| LoadError::Json {
        path: path.to_owned(),
        source,
    })
}

/// Checks dtypes, bounds and overlaps of every entry against a blob length.
pub fn validate_layout(manifest: &WeightManifest, blob_len: u64) -> Result<(), LoadError> {
    let mut spans = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        if e.dtype != DTYPE {
            return Err(LoadError::Dtype {
                name: e.name.clone(),
                dtype: e.dtype.clone(),
            });
        }
        let end = e.offset + e.byte_len();
        if end > blob_len {
            return Err(LoadError::Truncated {
                name: e.name.clone(),
                start: e.offset,
                end,
                blob_len,
            });
        }
        spans.push((e.offset, end, &e.name));
    }
    spans.sort();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(LoadError::Overlap {
                a: w[0].2.clone(),
                b: w[1].2.clone(),
            });
        }
    }
    Ok(())
}

fn floats(blob: &[u8], e: &ManifestEntry) -> Vec<f32> {
    let start = e.offset as usize;
    blob[start..start + e.byte_len() as usize]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

/// Builds a backbone from a parsed manifest and its blob.
pub fn backbone_from_parts(
    manifest: &WeightManifest,
    blob: &[u8],
    config: BackboneConfig,
) -> Result<Backbone, LoadError> {
    validate_layout(manifest, blob.len() as u64)?;
    let find = |layer: &str, entry: String| {
        manifest
            .entries
            .iter()
            .find(|e| e.name == entry)
            .ok_or_else(|| LoadError::MissingEntry {
                layer: layer.to_owned(),
                entry,
            })
    };
    let mut convs = Vec::new();
    for layer in conv_names() {
        let k = find(layer, kernel_entry(layer))?;
        let b = find(layer, bias_entry(layer))?;
        let [out, inp, kh, kw] = k.shape[..] else {
            return Err(LoadError::Shape {
                name: k.name.clone(),
                expected: "[out, in, kh, kw]".into(),
                actual: k.shape.clone(),
            });
        };
        if kh != KERNEL_SIZE || kw != KERNEL_SIZE {
            return Err(LoadError::Shape {
                name: k.name.clone(),
                expected: format!("[{out}, {inp}, {KERNEL_SIZE}, {KERNEL_SIZE}]"),
                actual: k.shape.clone(),
            });
        }
        if b.shape != [out] {
            return Err(LoadError::Shape {
                name: b.name.clone(),
                expected: format!("[{out}]"),
                actual: b.shape.clone(),
            });
        }
        convs.push(ConvLayer {
            name: layer.to_owned(),
            filter: Filter::from_vec(out, inp, kh, kw, floats(blob, k))?,
            bias: floats(blob, b),
        });
    }
    Ok(Backbone::new(convs, manifest.preprocessing.clone(), config)?)
}

pub fn load_weights(manifest_path: &Path, blob_path: &Path) -> Result<LoadedWeights, LoadError> {
    let manifest = read_manifest(manifest_path)?;
    let blob = read(blob_path)?;
    let backbone = backbone_from_parts(&manifest, &blob, BackboneConfig::default())?;
    Ok(LoadedWeights {
        backbone,
        manifest,
        blob_sha256: sha256_hex(&blob),
    })
}

/// Loads `manifest.json` and `weights.bin` from a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<LoadedWeights, LoadError> {
    load_weights(&dir.join(MANIFEST_FILE), &dir.join(BLOB_FILE))
}

/// Serialises a backbone's convolutions as a manifest and blob, entries in
/// layer order with contiguous offsets.
pub fn to_parts(backbone: &Backbone, source_note: &str) -> (WeightManifest, Vec<u8>) {
    let mut blob = Vec::new();
    let mut entries = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, data: &[f32]| {
        entries.push(ManifestEntry {
            name,
            shape,
            dtype: DTYPE.into(),
            offset: blob.len() as u64,
        });
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    };
    for c in backbone.convs() {
        let f = &c.filter;
        push(
            kernel_entry(&c.name),
            vec![f.out_channels(), f.in_channels(), f.kh(), f.kw()],
            f.data(),
        );
        push(bias_entry(&c.name), vec![c.bias.len()], &c.bias);
    }
    let manifest = WeightManifest {
        entries,
        preprocessing: backbone.preprocessing().clone(),
        source_note: source_note.into(),
    };
    (manifest, blob)
}

pub fn write_bundle(dir: &Path, backbone: &Backbone, source_note: &str) -> std::io::Result<()> {
    let (manifest, blob) = to_parts(backbone, source_note);
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    fs::write(dir.join(BLOB_FILE), blob)
}
