//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs without the libtest harness so the lines show under a plain
//! `cargo test`. The weight-dependent criteria run only with `--ignored` (or
//! `--include-ignored`) and `ECCNET_WEIGHTS` pointing at a bundle directory.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eccnet::harness::{run_experiment, ExperimentReport, RunConfig, Saliency};
use eccnet::verify::{check_fusion, rf_table_mismatches};
use eccnet::weights::{load_bundle, LoadedWeights};
use eccnet_core::analysis::{fit_slope, RtModel};
use eccnet_core::attention::modulation_map;
use eccnet_core::backbone::{estimate_rf_profile, BackboneConfig, REFERENCE_RF_TABLE};
use eccnet_core::ops::{conv2d, ecc_avg_pool, EccPoolConfig, Padding};
use eccnet_core::search::{winner_take_all, Searcher};
use eccnet_core::stimuli::{generate, Condition, Experiment};
use eccnet_core::{Filter, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
    /// Failures of sampling statistics are reported but do not fail the run.
    gating: bool,
}

impl Outcome {
    fn check(passed: bool, detail: String) -> Self {
        Outcome {
            status: if passed { Status::Pass } else { Status::Fail },
            detail,
            gating: true,
        }
    }
}

type Criterion = (&'static str, Option<Duration>, fn(bool) -> Outcome);

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let slow = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");

    let criteria: [Criterion; 9] = [
        ("rf-table", Some(Duration::from_secs(1)), rf_table),
        ("fusion-fixture", Some(Duration::from_secs(1)), fusion_fixture),
        ("rt-affine", None, rt_affine),
        ("kernel-oracles", Some(Duration::from_secs(60)), kernel_oracles),
        ("rf-profile", Some(Duration::from_secs(300)), rf_profile),
        (
            "stimulus-properties",
            Some(Duration::from_secs(60)),
            stimulus_properties,
        ),
        ("chance-null", Some(Duration::from_secs(60)), chance_null),
        ("asymmetry-polarity", None, polarity),
        ("ablation-ordering", None, ablation),
    ];

    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let mut out = f(slow);
        let took = start.elapsed();
        if let (Some(b), Status::Pass) = (budget, &out.status) {
            if took > b {
                out = Outcome::check(false, format!("{} (took {took:.2?}, budget {b:?})", out.detail));
            }
        }
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Fail if out.gating => {
                failed += 1;
                "FAIL"
            }
            Status::Fail => "FAIL (non-gating)",
            Status::Skip => "SKIP",
        };
        println!("{tag} {name} [{took:.2?}]: {}", out.detail);
    }
    if failed > 0 {
        println!("{failed} gating criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn rf_table(_: bool) -> Outcome {
    let cfg = BackboneConfig::default();
    let total: usize = REFERENCE_RF_TABLE.iter().map(|(_, r)| r.len()).sum();
    // Pooling rule restated: r = floor(gamma * (d - eta * delta) + 2.5)
    // outside the fovea, 2 inside.
    let mut bad = Vec::new();
    for (i, (layer, rows)) in REFERENCE_RF_TABLE.iter().enumerate() {
        let eta = 30.0 / f64::powi(2.0, i as i32 + 1);
        for &(d, want) in rows {
            let d = d as f64;
            let got = if d <= eta * cfg.delta {
                2
            } else {
                (cfg.gammas[i] * (d - eta * cfg.delta) + 2.5).floor() as u32
            };
            if got != want {
                bad.push((*layer, d, want, got));
            }
        }
    }
    let engine_bad = rf_table_mismatches(&cfg);
    let literal = rf_table_mismatches(&BackboneConfig {
        delta: 4.0,
        ..cfg.clone()
    });
    Outcome::check(
        bad.is_empty() && engine_bad.is_empty(),
        format!(
            "{}/{total} entries equal at fovea {} dva (oracle and engine); a 4 dva fovea leaves {} mismatched: {:?}",
            total - engine_bad.len().max(bad.len()),
            cfg.delta,
            literal.len(),
            literal.iter().map(|&(l, d, _, _)| (l, d)).collect::<Vec<_>>()
        ),
    )
}

fn fusion_fixture(_: bool) -> Outcome {
    let c = check_fusion();
    Outcome::check(c.passed, c.detail)
}

fn rt_affine(_: bool) -> Outcome {
    let rt = RtModel::default();
    let one = rt.rt_ms(1);
    let mut cfg = RunConfig::new(Experiment::Lighting, Searcher::Chance);
    cfg.trials_per_condition = Some(30);
    let report = run_experiment(&cfg, None, None, None).expect("chance run");
    let pts: Vec<(f64, f64)> = report
        .trials
        .iter()
        .filter_map(|t| t.rt_ms.map(|r| (t.n_fixations as f64, r)))
        .collect();
    let (slope, intercept) = fit_slope(&pts).expect("at least two distinct n");
    let ok = one == 628.63 && (slope - 252.36).abs() < 1e-9 && (intercept - 376.27).abs() < 1e-9;
    Outcome::check(
        ok,
        format!(
            "n = 1 -> {one} ms; fit over {} trials: slope {slope:.9}, intercept {intercept:.9}",
            pts.len()
        ),
    )
}

fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
}

fn conv_oracle(x: &Tensor, k: &[f32], (o, kh, kw): (usize, usize, usize), bias: &[f32], same: bool) -> Vec<f32> {
    let (c, h, w) = x.dims();
    let (pt, pl, oh, ow) = if same {
        ((kh - 1) / 2, (kw - 1) / 2, h, w)
    } else {
        (0, 0, h + 1 - kh, w + 1 - kw)
    };
    let mut out = Vec::with_capacity(o * oh * ow);
    for oc in 0..o {
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = bias[oc] as f64;
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let (sy, sx) = ((y + ky) as isize - pt as isize, (xx + kx) as isize - pl as isize);
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            let kv = k[((oc * c + ic) * kh + ky) * kw + kx] as f64;
                            acc += kv * x.get(ic, sy as usize, sx as usize) as f64;
                        }
                    }
                }
                out.push(acc as f32);
            }
        }
    }
    out
}

fn max_abs(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs() as f64))
}

fn kernel_oracles(_: bool) -> Outcome {
    const N: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 4];

    for _ in 0..N {
        let (c, h, w) = (rng.random_range(1..4), rng.random_range(3..12), rng.random_range(3..12));
        let (o, kh, kw) = (
            rng.random_range(1..4),
            rng.random_range(1..=h.min(5)),
            rng.random_range(1..=w.min(5)),
        );
        let x = rand_tensor(&mut rng, c, h, w);
        let k: Vec<f32> = (0..o * c * kh * kw).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias: Vec<f32> = (0..o).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Filter::from_vec(o, c, kh, kw, k.clone()).unwrap();
        for same in [true, false] {
            let got = conv2d(&x, &f, &bias, if same { Padding::Same } else { Padding::Valid }).unwrap();
            worst[0] = worst[0].max(max_abs(got.data(), &conv_oracle(&x, &k, (o, kh, kw), &bias, same)));
        }
    }

    for _ in 0..N {
        let (c, h, w) = (rng.random_range(1..3), rng.random_range(2..40), rng.random_range(2..40));
        let cfg = EccPoolConfig::new(
            rng.random_range(0.0..1.0),
            [15.0, 7.5, 3.75, 1.875, 0.9375][rng.random_range(0..5)],
            rng.random_range(0.5..6.0),
        )
        .unwrap();
        let fix = (rng.random_range(0..h), rng.random_range(0..w));
        let x = rand_tensor(&mut rng, c, h, w);
        let got = ecc_avg_pool(&x, &cfg, fix).unwrap();
        let want = Tensor::from_fn(c, h.div_ceil(2), w.div_ceil(2), |ch, i, j| {
            let (ay, ax) = ((2 * i) as f64, (2 * j) as f64);
            let d = ((ay - fix.0 as f64).hypot(ax - fix.1 as f64)) / 2.0;
            let e = d / cfg.eta;
            let r = if e <= cfg.delta {
                2
            } else {
                ((cfg.eta * cfg.gamma * (e - cfg.delta) + 2.5).floor() as i64).max(2)
            };
            let lo = |a: f64| a as i64 - (r - 1) / 2;
            let (mut s, mut n) = (0.0f64, 0);
            for y in lo(ay)..lo(ay) + r {
                for xx in lo(ax)..lo(ax) + r {
                    if (0..h as i64).contains(&y) && (0..w as i64).contains(&xx) {
                        s += x.get(ch, y as usize, xx as usize) as f64;
                        n += 1;
                    }
                }
            }
            (s / n as f64) as f32
        });
        worst[1] = worst[1].max(max_abs(got.data(), want.data()));
    }

    for _ in 0..N {
        let c = rng.random_range(1..5);
        let (h, w) = (rng.random_range(4..14), rng.random_range(4..14));
        let (th, tw) = (rng.random_range(1..=h.min(6)), rng.random_range(1..=w.min(6)));
        let t = rand_tensor(&mut rng, c, th, tw);
        let s = rand_tensor(&mut rng, c, h, w);
        let got = modulation_map(&t, &s).unwrap();
        let want = conv_oracle(&s, t.data(), (1, th, tw), &[0.0], true);
        worst[2] = worst[2].max(max_abs(got.data(), &want));
    }

    let mut wta_bad = 0;
    for _ in 0..N {
        let (h, w) = (rng.random_range(1..10), rng.random_range(1..10));
        // Few distinct values so ties are common.
        let map = Tensor::from_fn(1, h, w, |_, _, _| rng.random_range(0..4) as f32);
        let mut ior: Vec<bool> = (0..h * w).map(|_| rng.random_bool(0.4)).collect();
        if ior.iter().all(|&m| m) {
            ior[rng.random_range(0..h * w)] = false;
        }
        let mut want = None;
        for r in 0..h {
            for c in 0..w {
                if ior[r * w + c] {
                    continue;
                }
                let v = map.get(0, r, c);
                if want.map_or(true, |(_, b)| v > b) {
                    want = Some(((r, c), v));
                }
            }
        }
        if winner_take_all(&map, &ior).ok() != want.map(|(p, _)| p) {
            wta_bad += 1;
        }
    }

    let ok = worst[0] <= 1e-5 && worst[1] <= 1e-5 && worst[2] <= 1e-4 && wta_bad == 0;
    Outcome::check(
        ok,
        format!(
            "{N} instances each; max abs error conv2d {:.1e}, ecc_avg_pool {:.1e}, modulation_map {:.1e}; winner_take_all mismatches {wta_bad}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn rf_profile(_: bool) -> Outcome {
    let cfg = BackboneConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for (i, layer) in [3u8, 6, 10, 14, 18].into_iter().enumerate() {
        let pts = match estimate_rf_profile(&cfg, layer, 1200) {
            Ok(p) => p,
            Err(e) => return Outcome::check(false, format!("layer {layer}: {e}")),
        };
        let eta = 30.0 / f64::powi(2.0, i as i32 + 1);
        let mut worst = 0i64;
        for p in &pts {
            let e = p.distance_px / eta;
            let want = if e <= cfg.delta {
                2
            } else {
                (eta * cfg.gammas[i] * (e - cfg.delta) + 2.5).floor() as i64
            };
            worst = worst.max((p.rf_px as i64 - want).abs());
        }
        let flat = pts.iter().all(|p| p.rf_px == 2);
        ok &= !pts.is_empty() && worst <= 1 && (layer > 6 || flat);
        let top = pts.iter().map(|p| p.rf_px).max().unwrap_or(0);
        notes.push(format!("L{layer}: {} units, max dev {worst}, max rf {top}", pts.len()));
    }
    Outcome::check(ok, notes.join("; "))
}

fn stimulus_properties(_: bool) -> Outcome {
    let mut n = 0;
    let mut problems = Vec::new();
    for cond in Condition::ALL {
        for &k in cond.experiment().plan().set_sizes {
            for seed in 0..20u64 {
                let seed = seed.wrapping_mul(0x9e37_79b9) + k as u64;
                let a = match generate(cond, k, seed) {
                    Ok(a) => a,
                    Err(e) => {
                        problems.push(format!("{cond} k={k} seed={seed}: {e}"));
                        continue;
                    }
                };
                let b = generate(cond, k, seed).unwrap();
                n += 1;
                let (h, w) = a.image_dims();
                let targets = a.item_boxes.iter().filter(|r| **r == a.target_box).count();
                let overlap = (0..k).any(|i| (i + 1..k).any(|j| a.item_boxes[i].overlaps(&a.item_boxes[j])));
                let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                let same = bits(&a.search_image) == bits(&b.search_image)
                    && bits(&a.target_image) == bits(&b.target_image)
                    && a.item_boxes == b.item_boxes
                    && a.target_box == b.target_box;
                if a.item_boxes.len() != k
                    || targets != 1
                    || a.item_boxes.get(a.target_index) != Some(&a.target_box)
                    || overlap
                    || !a.item_boxes.iter().all(|r| r.within(h, w))
                    || !same
                {
                    problems.push(format!("{cond} k={k} seed={seed}"));
                }
            }
        }
    }
    Outcome::check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{n} displays: one target, set size, no overlap, in bounds, bitwise repeatable")
        } else {
            format!(
                "{} of {n} displays violate: {:?}",
                problems.len(),
                &problems[..problems.len().min(5)]
            )
        },
    )
}

fn slopes(r: &ExperimentReport) -> String {
    r.conditions
        .iter()
        .map(|c| format!("{} {:.1}", c.condition, c.slope_ms_per_item.unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn chance_null(_: bool) -> Outcome {
    let mut cfg = RunConfig::new(Experiment::Curvature, Searcher::Chance);
    cfg.trials_per_condition = Some(90);
    let r = run_experiment(&cfg, None, None, None).expect("chance run");
    let ai = r.asymmetry_index.unwrap_or(f64::NAN);
    let mut out = Outcome::check(
        ai.abs() < 0.15,
        format!(
            "AI {ai:.3} at master seed {} (slopes ms/item: {}); threshold |AI| < 0.15",
            cfg.master_seed,
            slopes(&r)
        ),
    );
    out.gating = false;
    out
}

fn weights() -> Result<LoadedWeights, String> {
    let dir = std::env::var_os("ECCNET_WEIGHTS").ok_or("ECCNET_WEIGHTS is not set")?;
    load_bundle(&PathBuf::from(dir)).map_err(|e| e.to_string())
}

fn desk_run(w: &LoadedWeights, exp: Experiment, tweak: impl Fn(&mut RunConfig)) -> ExperimentReport {
    let mut cfg = RunConfig::new(exp, Searcher::EccNet);
    cfg.trials_per_condition = Some(30);
    cfg.saliency = Saliency::Grouped;
    tweak(&mut cfg);
    run_experiment(&cfg, Some(w), None, None).expect("eccnet run")
}

fn needs_weights(slow: bool) -> Result<LoadedWeights, Outcome> {
    let skip = |why: String| Outcome {
        status: Status::Skip,
        detail: why,
        gating: true,
    };
    if !slow {
        return Err(skip(
            "weight-dependent; run with -- --ignored and ECCNET_WEIGHTS=<bundle dir>".into(),
        ));
    }
    weights().map_err(skip)
}

fn polarity(slow: bool) -> Outcome {
    let w = match needs_weights(slow) {
        Ok(w) => w,
        Err(o) => return o,
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for exp in Experiment::ALL {
        let ai = desk_run(&w, exp, |_| {}).asymmetry_index.unwrap_or(f64::NAN);
        let want_positive = exp != Experiment::Orientation;
        ok &= if want_positive { ai > 0.0 } else { ai < 0.0 };
        notes.push(format!("exp {}: {ai:.3}", exp.number()));
    }
    Outcome::check(ok, notes.join(", "))
}

fn ablation(slow: bool) -> Outcome {
    let w = match needs_weights(slow) {
        Ok(w) => w,
        Err(o) => return o,
    };
    let mean_ai = |tweak: &dyn Fn(&mut RunConfig)| {
        Experiment::ALL
            .iter()
            .map(|&e| desk_run(&w, e, tweak).asymmetry_index.unwrap_or(f64::NAN))
            .sum::<f64>()
            / 6.0
    };
    let full = mean_ai(&|_| {});
    let no_ecc = mean_ai(&|c| c.options.no_ecc = true);
    let single = mean_ai(&|c| c.options.single_layer = true);
    Outcome::check(
        no_ecc < full && single < full,
        format!("mean AI: full {full:.3}, no-ecc {no_ecc:.3}, single-layer {single:.3}"),
    )
}
