//! Reference activations computed outside this crate for one fixed image.

use std::fs;
use std::path::Path;

use anyhow::{ensure, Context};
use eccnet_core::backbone::{Backbone, PoolMode};
use eccnet_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::weights::sha256_hex;

pub const REFERENCE_FILE: &str = "reference.json";

/// A tensor with the SHA-256 of its little-endian f32 stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 3],
    pub sha256: String,
    pub values: Vec<f32>,
}

impl TensorRecord {
    pub fn from_tensor(t: &Tensor) -> Self {
        let (c, h, w) = t.dims();
        TensorRecord {
            shape: [c, h, w],
            sha256: tensor_digest(t),
            values: t.data().to_vec(),
        }
    }

    pub fn to_tensor(&self) -> anyhow::Result<Tensor> {
        let [c, h, w] = self.shape;
        Ok(Tensor::from_vec(c, h, w, self.values.clone())?)
    }
}

pub fn tensor_digest(t: &Tensor) -> String {
    let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Raw image, values in [0, 255].
    pub image: TensorRecord,
    pub pooling: PoolMode,
    pub preprocessed: TensorRecord,
    pub layer17: TensorRecord,
}

pub fn read_reference(path: &Path) -> anyhow::Result<Reference> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// Largest absolute difference, over the largest reference magnitude.
pub fn max_relative_error(got: &[f32], want: &[f32]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs() as f64));
    let diff = got
        .iter()
        .zip(want)
        .fold(0.0f64, |m, (a, b)| m.max((*a as f64 - *b as f64).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceCheck {
    pub preprocess_max_abs: f64,
    pub layer17_max_rel: f64,
    pub layer17_digest_equal: bool,
}

/// Runs the backbone on the reference image with the recorded pooling.
pub fn check_reference(backbone: &Backbone, reference: &Reference) -> anyhow::Result<ReferenceCheck> {
    let image = reference.image.to_tensor()?;
    let pre = backbone.preprocess(&image)?;
    let want_pre = reference.preprocessed.to_tensor()?;
    ensure!(
        pre.dims() == want_pre.dims(),
        "preprocessed dims {:?} vs {:?}",
        pre.dims(),
        want_pre.dims()
    );
    let preprocess_max_abs = pre
        .data()
        .iter()
        .zip(want_pre.data())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() as f64));
    let centre = (pre.height() / 2, pre.width() / 2);
    let l17 = backbone.extract(&pre, centre, reference.pooling)?.l17;
    let want = reference.layer17.to_tensor()?;
    ensure!(
        l17.dims() == want.dims(),
        "layer-17 dims {:?} vs {:?}",
        l17.dims(),
        want.dims()
    );
    Ok(ReferenceCheck {
        preprocess_max_abs,
        layer17_max_rel: max_relative_error(l17.data(), want.data()),
        layer17_digest_equal: tensor_digest(&l17) == reference.layer17.sha256,
    })
}

/// Builds a reference record from this engine's own forward pass.
pub fn make_reference(backbone: &Backbone, image: &Tensor) -> anyhow::Result<Reference> {
    let pre = backbone.preprocess(image)?;
    let centre = (pre.height() / 2, pre.width() / 2);
    let l17 = backbone.extract(&pre, centre, PoolMode::Uniform)?.l17;
    Ok(Reference {
        image: TensorRecord::from_tensor(image),
        pooling: PoolMode::Uniform,
        preprocessed: TensorRecord::from_tensor(&pre),
        layer17: TensorRecord::from_tensor(&l17),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::tiny_backbone;

    #[test]
    fn self_reference_is_exact() {
        let bb = tiny_backbone(4);
        let img = Tensor::from_fn(3, 40, 36, |c, y, x| ((c * 50 + y * 3 + x * 5) % 256) as f32);
        let r = make_reference(&bb, &img).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: Reference = serde_json::from_str(&json).unwrap();
        let check = check_reference(&bb, &back).unwrap();
        assert_eq!(check.preprocess_max_abs, 0.0);
        assert_eq!(check.layer17_max_rel, 0.0);
        assert!(check.layer17_digest_equal);
        let other = check_reference(&tiny_backbone(5), &back).unwrap();
        assert!(other.layer17_max_rel > 1e-3);
    }

    #[test]
    fn relative_error() {
        assert_eq!(max_relative_error(&[1.0, 2.0], &[1.0, 4.0]), 0.5);
        assert_eq!(max_relative_error(&[0.5], &[0.0]), 0.5);
    }
}
