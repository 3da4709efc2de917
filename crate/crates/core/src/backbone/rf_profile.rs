use alloc::vec;
use alloc::vec::Vec;

use super::{input_stride, BackboneConfig};
use crate::ops::{ecc_avg_pool, ecc_rf_size};
use crate::{Error, Result, Tensor};

/// Published local receptive-field sizes (input units) against distance from
/// the fixation (output-grid pixels) for a 1200 x 1200 px input, per pooling
/// layer.
pub const REFERENCE_RF_TABLE: [(u8, [(u32, u32); 16]); 5] = [
    (
        3,
        [
            (60, 2),
            (75, 2),
            (90, 2),
            (105, 2),
            (120, 2),
            (135, 2),
            (150, 2),
            (165, 2),
            (180, 2),
            (195, 2),
            (210, 2),
            (225, 2),
            (240, 2),
            (255, 2),
            (270, 2),
            (285, 2),
        ],
    ),
    (
        6,
        [
            (30, 2),
            (38, 2),
            (46, 2),
            (54, 2),
            (62, 2),
            (70, 2),
            (78, 2),
            (86, 2),
            (94, 2),
            (102, 2),
            (110, 2),
            (118, 2),
            (126, 2),
            (134, 2),
            (142, 2),
            (150, 2),
        ],
    ),
    (
        10,
        [
            (16, 2),
            (20, 3),
            (24, 3),
            (28, 4),
            (32, 4),
            (36, 5),
            (40, 5),
            (44, 6),
            (48, 6),
            (52, 7),
            (56, 8),
            (60, 8),
            (64, 9),
            (68, 9),
            (72, 10),
            (76, 10),
        ],
    ),
    (
        14,
        [
            (8, 2),
            (10, 3),
            (12, 3),
            (14, 4),
            (16, 5),
            (18, 5),
            (20, 6),
            (22, 6),
            (24, 7),
            (26, 8),
            (28, 8),
            (30, 9),
            (32, 10),
            (34, 10),
            (36, 11),
            (38, 12),
        ],
    ),
    (
        18,
        [
            (4, 2),
            (5, 3),
            (6, 3),
            (7, 4),
            (8, 5),
            (9, 5),
            (10, 6),
            (11, 6),
            (12, 7),
            (13, 8),
            (14, 8),
            (15, 9),
            (16, 10),
            (17, 10),
            (18, 11),
            (19, 12),
        ],
    ),
];

/// One probed unit on the fixation row.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RfPoint {
    /// Distance to the fixation in output-grid pixels.
    pub distance_px: f64,
    /// Measured window width in input-grid pixels.
    pub rf_px: usize,
    pub eccentricity_dva: f64,
    pub rf_dva: f64,
}

/// Measures receptive fields of one pooling stage by probing a pooling-only
/// copy of it.
///
/// The stage sees an input grid matching an `image_px`-wide image. A black
/// and a white frame pick out responsive units; then a single white pixel is
/// swept along the fixation row and, for every unit right of the fixation,
/// the span of probe positions that raise it above the black baseline is its
/// receptive field. Units whose span touches the border are dropped.
pub fn estimate_rf_profile(cfg: &BackboneConfig, layer_id: u8, image_px: usize) -> Result<Vec<RfPoint>> {
    let pool = cfg.pool_config(layer_id)?;
    let width = image_px / input_stride(layer_id);
    if width < 8 {
        return Err(Error::invalid(alloc::format!(
            "rf-profile: {image_px} px image leaves only {width} columns at layer {layer_id}"
        )));
    }
    // A strip tall enough for the largest window, with the fixation on an
    // anchor (even coordinates).
    let r_max = ecc_rf_size(&pool, width as f64);
    let height = 2 * (r_max + 1);
    let fix = ((height / 2) & !1, (width / 2) & !1);

    let black = ecc_avg_pool(&Tensor::zeros(1, height, width), &pool, fix)?;
    let white = ecc_avg_pool(&Tensor::filled(1, height, width, 1.0), &pool, fix)?;
    let out_row = fix.0 / 2;
    let ow = black.width();
    let responsive: Vec<bool> = (0..ow)
        .map(|j| white.get(0, out_row, j) > black.get(0, out_row, j))
        .collect();

    // active[j] = (first, last, count) of probe columns that drive unit j.
    let mut active: Vec<Option<(usize, usize, usize)>> = vec![None; ow];
    let mut probe = Tensor::zeros(1, height, width);
    for x in 0..width {
        probe.set(0, fix.0, x, 1.0);
        let out = ecc_avg_pool(&probe, &pool, fix)?;
        probe.set(0, fix.0, x, 0.0);
        for j in 0..ow {
            if responsive[j] && out.get(0, out_row, j) > black.get(0, out_row, j) {
                active[j] = Some(match active[j] {
                    None => (x, x, 1),
                    Some((a, _, n)) => (a, x, n + 1),
                });
            }
        }
    }

    let eta = pool.eta;
    let mut points = Vec::new();
    for j in fix.1 / 2..ow {
        let Some((first, last, count)) = active[j] else {
            continue;
        };
        if first == 0 || last + 1 == width {
            continue;
        }
        debug_assert_eq!(count, last - first + 1, "receptive field must be contiguous");
        let distance_px = (2 * j - fix.1) as f64 / 2.0;
        let rf_px = last - first + 1;
        points.push(RfPoint {
            distance_px,
            rf_px,
            eccentricity_dva: distance_px / eta,
            rf_dva: rf_px as f64 / (2.0 * eta),
        });
    }
    Ok(points)
}
