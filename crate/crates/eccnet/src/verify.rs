//! Built-in numeric fixtures. Each check is self-contained and needs no
//! weights.

use eccnet_core::analysis::RtModel;
use eccnet_core::attention::{fuse, LayerMap};
use eccnet_core::backbone::{estimate_rf_profile, BackboneConfig, REFERENCE_RF_TABLE};
use eccnet_core::ops::ecc_rf_size;
use eccnet_core::Tensor;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Table entries `(layer, distance, size)` where the pooling rule under `cfg`
/// disagrees with the published receptive-field table.
pub fn rf_table_mismatches(cfg: &BackboneConfig) -> Vec<(u8, u32, u32, usize)> {
    let mut out = Vec::new();
    for (layer, rows) in REFERENCE_RF_TABLE {
        let pool = cfg.pool_config(layer).expect("pooling layer");
        for (d, want) in rows {
            let got = ecc_rf_size(&pool, d as f64);
            if got != want as usize {
                out.push((layer, d, want, got));
            }
        }
    }
    out
}

pub fn check_rf_table() -> Check {
    let total: usize = REFERENCE_RF_TABLE.iter().map(|(_, r)| r.len()).sum();
    let bad = rf_table_mismatches(&BackboneConfig::default());
    Check {
        name: "rf-table",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{total}/{total} window sizes match")
        } else {
            format!("{} of {total} mismatched: {bad:?}", bad.len())
        },
    }
}

/// Measured receptive fields at 1200 px against the published table.
pub fn check_rf_profile() -> Check {
    let cfg = BackboneConfig::default();
    let mut compared = 0;
    let mut bad = Vec::new();
    for (layer, rows) in REFERENCE_RF_TABLE {
        let pts = match estimate_rf_profile(&cfg, layer, 1200) {
            Ok(p) => p,
            Err(e) => {
                return Check {
                    name: "rf-profile",
                    passed: false,
                    detail: e.to_string(),
                };
            }
        };
        for (d, want) in rows {
            if let Some(p) = pts.iter().find(|p| p.distance_px == d as f64) {
                compared += 1;
                if p.rf_px != want as usize {
                    bad.push((layer, d, want, p.rf_px));
                }
            }
        }
    }
    Check {
        name: "rf-profile",
        passed: bad.is_empty() && compared > 0,
        detail: if bad.is_empty() {
            format!("{compared} probed units match the table")
        } else {
            format!("{} of {compared} probed units differ: {bad:?}", bad.len())
        },
    }
}

/// Three single-row maps `[min, point, max]` per tapped layer.
pub const FUSION_EXTREMA: [(u8, f32, f32); 3] =
    [(9, 255590.0, 415261.0), (13, 57584.0, 164618.0), (17, 846.0, 17118.0)];
pub const FUSION_POINT: [f32; 3] = [412454.0, 143382.0, 9492.0];
pub const FUSION_SECOND_POINT: [f32; 3] = [392635.0, 163745.0, 13075.0];

pub struct FusionFixture {
    pub weights: [f64; 3],
    pub normalized: [f64; 3],
    pub fused: f64,
    pub raw_sum_first: f64,
    pub raw_sum_second: f64,
}

pub fn fusion_fixture() -> anyhow::Result<FusionFixture> {
    let maps: Vec<LayerMap> = FUSION_EXTREMA
        .iter()
        .zip(FUSION_POINT.iter().zip(FUSION_SECOND_POINT))
        .map(|(&(layer, lo, hi), (&p, q))| LayerMap {
            layer,
            map: Tensor::from_vec(1, 1, 4, vec![lo, p, hi, q]).expect("4 values"),
        })
        .collect();
    let (att, w) = fuse(&maps, 1)?;
    let mut weights = [0.0; 3];
    let mut normalized = [0.0; 3];
    for (i, &(layer, lo, hi)) in FUSION_EXTREMA.iter().enumerate() {
        weights[i] = w.get(layer).unwrap_or(f64::NAN);
        normalized[i] = (FUSION_POINT[i] - lo) as f64 / (hi - lo) as f64;
    }
    Ok(FusionFixture {
        weights,
        normalized,
        fused: att.values.get(0, 0, 1) as f64,
        raw_sum_first: FUSION_POINT.iter().map(|&v| v as f64).sum(),
        raw_sum_second: maps.iter().map(|m| m.map.get(0, 0, 3) as f64).sum(),
    })
}

pub fn check_fusion() -> Check {
    let f = match fusion_fixture() {
        Ok(f) => f,
        Err(e) => {
            return Check {
                name: "fusion",
                passed: false,
                detail: e.to_string(),
            }
        }
    };
    let close = |got: &[f64; 3], want: [f64; 3], tol: f64| got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol);
    let passed = close(&f.weights, [0.696, 0.276, 0.029], 1e-3)
        && close(&f.normalized, [0.982, 0.802, 0.531], 1e-3)
        && (f.fused - 0.92).abs() <= 5e-3
        && f.raw_sum_first == 565328.0
        && f.raw_sum_second == 569455.0;
    Check {
        name: "fusion",
        passed,
        detail: format!(
            "weights {:.3?}, normalized {:.3?}, fused {:.4}, raw sums {} / {}",
            f.weights, f.normalized, f.fused, f.raw_sum_first, f.raw_sum_second
        ),
    }
}

pub fn check_rt_model() -> Check {
    let rt = RtModel::default();
    let got = [rt.rt_ms(1), rt.rt_ms(2), rt.rt_ms(10)];
    let want = [628.63, 880.99, 2899.87];
    let passed = got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-9);
    Check {
        name: "rt-model",
        passed,
        detail: format!("N = 1, 2, 10 -> {got:?} ms"),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![check_rf_table(), check_rf_profile(), check_fusion(), check_rt_model()]
}
