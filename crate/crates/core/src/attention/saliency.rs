use alloc::vec;
use alloc::vec::Vec;

use crate::backbone::FeatureStack;
use crate::math;
use crate::ops::resize_nn;
use crate::{Error, Result, Tensor};

pub const DEFAULT_BINS: usize = 256;

/// Probability of each unit's activation under the channel's own histogram:
/// `F(y_j) / sum_i F(y_i)`, with `bins` uniform bins over `[min, max]`.
/// Returns `None` for a flat channel.
pub fn unit_probabilities(plane: &[f32], bins: usize) -> Option<Vec<f64>> {
    let lo = plane.iter().copied().fold(f32::INFINITY, f32::min) as f64;
    let hi = plane.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    if !(hi > lo) {
        return None;
    }
    let scale = bins as f64 / (hi - lo);
    let bin_of = |v: f32| (((v as f64 - lo) * scale) as usize).min(bins - 1);
    let mut counts = vec![0u32; bins];
    for &v in plane {
        counts[bin_of(v)] += 1;
    }
    let freq: Vec<f64> = plane.iter().map(|&v| counts[bin_of(v)] as f64).collect();
    let total: f64 = freq.iter().sum();
    Some(freq.into_iter().map(|f| f / total).collect())
}

/// Self-information of one channel, `-ln p` divided by its range over the
/// channel. Adds into `acc`; flat channels add nothing.
fn add_channel_saliency(plane: &[f32], bins: usize, acc: &mut [f64]) {
    let Some(p) = unit_probabilities(plane, bins) else {
        return;
    };
    let info: Vec<f64> = p.iter().map(|&q| -math::ln(q)).collect();
    let lo = info.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = info.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return;
    }
    for (a, v) in acc.iter_mut().zip(info) {
        *a += v / range;
    }
}

fn layer_saliency(t: &Tensor, bins: usize) -> Tensor {
    let mut acc = vec![0.0f64; t.plane_len()];
    for c in 0..t.channels() {
        add_channel_saliency(t.plane(c), bins, &mut acc);
    }
    Tensor::from_vec(1, t.height(), t.width(), acc.into_iter().map(|v| v as f32).collect()).expect("plane-sized buffer")
}

/// Bottom-up saliency from the search features at layers 9, 13 and 17,
/// summed at layer-17 resolution.
pub fn saliency_map(stack: &FeatureStack, bins: usize) -> Result<Tensor> {
    if bins < 2 {
        return Err(Error::invalid(alloc::format!(
            "saliency needs at least 2 bins, got {bins}"
        )));
    }
    let (h, w) = (stack.l17.height(), stack.l17.width());
    let mut out = vec![0.0f32; h * w];
    for t in [&stack.l9, &stack.l13, &stack.l17] {
        let s = resize_nn(&layer_saliency(t, bins), h, w);
        for (o, v) in out.iter_mut().zip(s.data()) {
            *o += *v;
        }
    }
    Tensor::from_vec(1, h, w, out)
}
