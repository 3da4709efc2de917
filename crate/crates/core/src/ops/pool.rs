use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result, Tensor};

/// Output length of a stride-2 pool with border-clipped windows.
#[inline]
pub fn pooled_len(n: usize) -> usize {
    n.div_ceil(2)
}

/// Parameters of one eccentricity-dependent pooling layer.
///
/// `eta` is the pixels-per-dva factor of the layer's *output* grid and `delta`
/// is the fovea radius in dva. Inside the fovea every unit pools a
/// `foveal_rf x foveal_rf` window; outside, the window grows linearly with
/// distance at slope `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EccPoolConfig {
    pub gamma: f64,
    pub eta: f64,
    pub delta: f64,
    pub stride: usize,
    pub foveal_rf: usize,
}

impl EccPoolConfig {
    pub fn new(gamma: f64, eta: f64, delta: f64) -> Result<Self> {
        let cfg = EccPoolConfig {
            gamma,
            eta,
            delta,
            stride: 2,
            foveal_rf: 2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma.is_finite()
            && self.gamma >= 0.0
            && self.eta.is_finite()
            && self.eta > 0.0
            && self.delta.is_finite()
            && self.delta > 0.0
            && self.stride == 2
            && self.foveal_rf == 2;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!("invalid pooling config {self:?}")))
        }
    }
}

/// Window size (in input units) for a unit at distance `d` from the fixation,
/// measured in pixels of the layer's output grid.
pub fn ecc_rf_size(cfg: &EccPoolConfig, d: f64) -> usize {
    let ecc = d / cfg.eta;
    if ecc <= cfg.delta {
        return cfg.foveal_rf;
    }
    let r = math::floor(cfg.eta * cfg.gamma * (ecc - cfg.delta) + 2.5);
    (r as usize).max(cfg.foveal_rf)
}

/// Standard 2x2 / stride-2 average pooling; border windows average only the
/// pixels they cover.
pub fn avg_pool_2x2(input: &Tensor) -> Tensor {
    let (c, h, w) = input.dims();
    let (oh, ow) = (pooled_len(h), pooled_len(w));
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        let src = input.plane(ch);
        let dst = out.plane_mut(ch);
        for i in 0..oh {
            let y1 = (2 * i + 2).min(h);
            for j in 0..ow {
                let x1 = (2 * j + 2).min(w);
                let mut sum = 0.0f32;
                for y in 2 * i..y1 {
                    for x in 2 * j..x1 {
                        sum += src[y * w + x];
                    }
                }
                dst[i * ow + j] = sum / ((y1 - 2 * i) * (x1 - 2 * j)) as f32;
            }
        }
    }
    out
}

/// Clipped `[start, end)` of an `r`-wide window anchored at `anchor`.
#[inline]
fn window(anchor: usize, r: usize, len: usize) -> (usize, usize) {
    let start = anchor as isize - ((r as isize - 1) / 2);
    let end = (start + r as isize).min(len as isize);
    (start.max(0) as usize, end as usize)
}

/// Eccentricity-dependent average pooling around `fixation` (row, col in the
/// input grid).
///
/// Output unit `(i, j)` anchors at input `(2i, 2j)`; its window size comes from
/// [`ecc_rf_size`] at the unit's output-grid distance to the fixation. Windows
/// are clipped at the borders and averaged over covered pixels only.
pub fn ecc_avg_pool(input: &Tensor, cfg: &EccPoolConfig, fixation: (usize, usize)) -> Result<Tensor> {
    cfg.validate()?;
    let (c, h, w) = input.dims();
    let (fr, fc) = fixation;
    if fr >= h || fc >= w {
        return Err(Error::OutOfBounds {
            op: "ecc_avg_pool",
            row: fr,
            col: fc,
            height: h,
            width: w,
        });
    }
    let s = cfg.stride;
    let (oh, ow) = (h.div_ceil(s), w.div_ceil(s));

    // Windows are shared by every channel.
    let mut windows: Vec<(usize, usize, usize, usize, f64)> = Vec::with_capacity(oh * ow);
    for i in 0..oh {
        for j in 0..ow {
            let (ay, ax) = (s * i, s * j);
            let dy = ay as f64 - fr as f64;
            let dx = ax as f64 - fc as f64;
            let d = math::sqrt(dy * dy + dx * dx) / s as f64;
            let r = ecc_rf_size(cfg, d);
            let (y0, y1) = window(ay, r, h);
            let (x0, x1) = window(ax, r, w);
            let inv = 1.0 / ((y1 - y0) * (x1 - x0)) as f64;
            windows.push((y0, y1, x0, x1, inv));
        }
    }

    let mut out = Tensor::zeros(c, oh, ow);
    // Summed-area table with a zero first row/column.
    let stride = w + 1;
    let mut sat = vec![0.0f64; (h + 1) * stride];
    for ch in 0..c {
        let src = input.plane(ch);
        for y in 0..h {
            let mut row_sum = 0.0f64;
            for x in 0..w {
                row_sum += src[y * w + x] as f64;
                sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row_sum;
            }
        }
        let dst = out.plane_mut(ch);
        for (o, &(y0, y1, x0, x1, inv)) in dst.iter_mut().zip(&windows) {
            let sum = sat[y1 * stride + x1] - sat[y0 * stride + x1] - sat[y1 * stride + x0] + sat[y0 * stride + x0];
            *o = (sum * inv) as f32;
        }
    }
    Ok(out)
}
