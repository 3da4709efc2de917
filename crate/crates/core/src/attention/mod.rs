//! Top-down modulation maps, their fusion into a single attention map, and
//! the optional bottom-up saliency blend.

mod saliency;

use alloc::vec::Vec;

pub use saliency::{saliency_map, unit_probabilities, DEFAULT_BINS};

use crate::ops::{conv2d, minmax_normalize, resize_nn, Padding};
use crate::{Error, Filter, Result, Tensor};

/// Fused attention map at layer-17 resolution for fixation `fixation_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    pub values: Tensor,
    pub fixation_index: usize,
}

/// Per-layer fusion weights, in the order the maps were given.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FusionWeights {
    pub layers: Vec<(u8, f64)>,
}

impl FusionWeights {
    pub fn get(&self, layer: u8) -> Option<f64> {
        self.layers.iter().find(|(l, _)| *l == layer).map(|(_, w)| *w)
    }

    pub fn sum(&self) -> f64 {
        self.layers.iter().map(|(_, w)| w).sum()
    }
}

/// Correlates the target's features (as a single kernel spanning all
/// channels) over the search features: stride 1, "same" zero padding, one
/// output channel.
pub fn modulation_map(target: &Tensor, search: &Tensor) -> Result<Tensor> {
    if target.channels() != search.channels() {
        return Err(Error::shape(
            "modulation_map",
            format_args!("target with {} channels", search.channels()),
            format_args!("{} channels", target.channels()),
        ));
    }
    conv2d(search, &Filter::from_tensor(target), &[0.0], Padding::Same)
}

/// One layer's modulation map with its layer id.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerMap {
    pub layer: u8,
    pub map: Tensor,
}

/// Weighted sum of min-max normalised maps, each resized to the last map's
/// dims. A map's weight is its maximum over the sum of all maxima; a flat map
/// still contributes its maximum to that sum but adds zeros to the output.
pub fn fuse(maps: &[LayerMap], fixation_index: usize) -> Result<(AttentionMap, FusionWeights)> {
    let Some(last) = maps.last() else {
        return Err(Error::invalid("fuse: no modulation maps"));
    };
    let (oh, ow) = (last.map.height(), last.map.width());
    for m in maps {
        if m.map.channels() != 1 {
            return Err(Error::shape("fuse", "single-channel maps", m.map.channels()));
        }
    }

    let maxima: Vec<f64> = maps.iter().map(|m| m.map.max() as f64).collect();
    let total: f64 = maxima.iter().sum();
    let weights: Vec<f64> = if total > 0.0 && total.is_finite() && maxima.iter().all(|&m| m >= 0.0) {
        maxima.iter().map(|m| m / total).collect()
    } else {
        // No usable maxima: treat layers equally.
        let n = maps.len() as f64;
        maps.iter().map(|_| 1.0 / n).collect()
    };

    let mut acc = alloc::vec![0.0f64; oh * ow];
    for (m, &w) in maps.iter().zip(&weights) {
        let norm = resize_nn(&minmax_normalize(&m.map), oh, ow);
        for (a, v) in acc.iter_mut().zip(norm.data()) {
            *a += w * *v as f64;
        }
    }
    let values = Tensor::from_vec(1, oh, ow, acc.into_iter().map(|v| v as f32).collect())?;
    let weights = FusionWeights {
        layers: maps.iter().map(|m| m.layer).zip(weights).collect(),
    };
    Ok((AttentionMap { values, fixation_index }, weights))
}

/// Relative weight of bottom-up saliency during the first two fixations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BlendScheme {
    /// Top-down only.
    NoSaliency,
    /// Equal saliency and top-down on the first fixation.
    Equal,
    /// Saliency only on the first fixation.
    StrongSaliency,
}

impl BlendScheme {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(BlendScheme::NoSaliency),
            2 => Ok(BlendScheme::Equal),
            3 => Ok(BlendScheme::StrongSaliency),
            _ => Err(Error::invalid(alloc::format!("unknown blend scheme {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            BlendScheme::NoSaliency => 1,
            BlendScheme::Equal => 2,
            BlendScheme::StrongSaliency => 3,
        }
    }

    /// `(saliency weight, top-down weight)` at fixation `n` (1-based).
    pub fn weights(self, n: usize) -> (f64, f64) {
        match (self, n) {
            (BlendScheme::NoSaliency, _) => (0.0, 1.0),
            (BlendScheme::Equal, 1) => (0.5, 0.5),
            (BlendScheme::StrongSaliency, 1) => (1.0, 0.0),
            (_, 2) => (0.37, 0.63),
            _ => (0.0, 1.0),
        }
    }
}

/// `w_s * saliency + w_a * topdown` for fixation `n`. Both inputs are
/// expected in `[0, 1]`.
pub fn blend(topdown: &AttentionMap, saliency: &Tensor, scheme: BlendScheme, n: usize) -> Result<AttentionMap> {
    topdown.values.require_same_dims(saliency, "blend")?;
    let (ws, wa) = scheme.weights(n);
    if ws == 0.0 && wa == 1.0 {
        return Ok(topdown.clone());
    }
    let data = topdown
        .values
        .data()
        .iter()
        .zip(saliency.data())
        .map(|(&a, &s)| (ws * s as f64 + wa * a as f64) as f32)
        .collect();
    let (c, h, w) = saliency.dims();
    Ok(AttentionMap {
        values: Tensor::from_vec(c, h, w, data)?,
        fixation_index: topdown.fixation_index,
    })
}
