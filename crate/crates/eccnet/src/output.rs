//! Report files: per-trial CSV, summary JSON, scanpath JSON lines and an SVG
//! plot of reaction time against set size.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use crate::dump::write_json;
use crate::harness::{ConditionSummary, ExperimentReport, RunMetadata};

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SCANPATHS_JSONL: &str = "scanpaths.jsonl";
pub const PLOT_SVG: &str = "rt_vs_set_size.svg";

#[derive(Serialize)]
struct CsvRow<'a> {
    trial_id: &'a str,
    experiment: u8,
    condition: &'a str,
    letter: char,
    hard: bool,
    set_size: usize,
    index: usize,
    seed: u64,
    found: bool,
    capped: bool,
    n_fixations: usize,
    rt_ms: Option<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: u8,
    metadata: &'a RunMetadata,
    asymmetry_index: Option<f64>,
    n_trials: usize,
    n_capped: usize,
    conditions: &'a [ConditionSummary],
}

#[derive(Serialize)]
struct ScanpathLine<'a> {
    trial_id: &'a str,
    condition: &'a str,
    set_size: usize,
    seed: u64,
    scanpath: &'a [(usize, usize)],
    n: usize,
    rt_ms: Option<f64>,
    capped: bool,
}

pub fn emit_outputs(report: &ExperimentReport, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let csv_path = dir.join(RESULTS_CSV);
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    for t in &report.trials {
        w.serialize(CsvRow {
            trial_id: &t.trial_id,
            experiment: t.experiment,
            condition: t.condition.name(),
            letter: t.letter,
            hard: t.hard,
            set_size: t.set_size,
            index: t.index,
            seed: t.seed,
            found: t.found,
            capped: t.capped,
            n_fixations: t.n_fixations,
            rt_ms: t.rt_ms,
        })?;
    }
    w.flush()?;

    write_json(
        &dir.join(SUMMARY_JSON),
        &Summary {
            experiment: report.experiment,
            metadata: &report.metadata,
            asymmetry_index: report.asymmetry_index,
            n_trials: report.trials.len(),
            n_capped: report.trials.iter().filter(|t| t.capped).count(),
            conditions: &report.conditions,
        },
    )?;

    let jsonl = dir.join(SCANPATHS_JSONL);
    let mut out = BufWriter::new(File::create(&jsonl).with_context(|| format!("creating {}", jsonl.display()))?);
    for t in &report.trials {
        serde_json::to_writer(
            &mut out,
            &ScanpathLine {
                trial_id: &t.trial_id,
                condition: t.condition.name(),
                set_size: t.set_size,
                seed: t.seed,
                scanpath: &t.scanpath,
                n: t.n_fixations,
                rt_ms: t.rt_ms,
                capped: t.capped,
            },
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    fs::write(dir.join(PLOT_SVG), rt_plot_svg(report))?;
    Ok(())
}

const W: f64 = 520.0;
const H: f64 = 380.0;
const MARGIN: (f64, f64, f64, f64) = (40.0, 150.0, 50.0, 70.0); // top, right, bottom, left
const COLORS: [&str; 2] = ["#c0392b", "#2471a3"];

/// Mean RT against set size, one series per condition, with SE bars.
pub fn rt_plot_svg(report: &ExperimentReport) -> String {
    let (top, right, bottom, left) = MARGIN;
    let (pw, ph) = (W - left - right, H - top - bottom);
    let points = |c: &ConditionSummary| -> Vec<(f64, f64, f64)> {
        c.set_sizes
            .iter()
            .filter_map(|s| s.mean_rt_ms.map(|m| (s.set_size as f64, m, s.se_rt_ms.unwrap_or(0.0))))
            .collect()
    };
    let all: Vec<(f64, f64, f64)> = report.conditions.iter().flat_map(points).collect();
    let x_max = all.iter().map(|p| p.0).fold(1.0, f64::max);
    let y_max = nice_ceiling(all.iter().map(|p| p.1 + p.2).fold(1.0, f64::max));
    let sx = |x: f64| left + x / x_max * pw;
    let sy = |y: f64| top + ph - y / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">Experiment {} ({}), AI = {}</text>"#,
        left + pw / 2.0,
        report.experiment,
        searcher_name(report),
        report.asymmetry_index.map_or("n/a".into(), |a| format!("{a:.3}"))
    );
    // Axes.
    let _ = writeln!(
        s,
        r#"<path d="M{:.1},{:.1} V{:.1} H{:.1}" stroke="black" fill="none"/>"#,
        left,
        top,
        top + ph,
        left + pw
    );
    for i in 0..=4 {
        let y = y_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}</text>"#,
            left - 4.0,
            sy(y),
            left,
            sy(y),
            left - 7.0,
            sy(y) + 4.0,
            y
        );
    }
    let mut sizes: Vec<f64> = all.iter().map(|p| p.0).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    for x in sizes {
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
            sx(x),
            top + ph,
            sx(x),
            top + ph + 4.0,
            sx(x),
            top + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Number of items</text>"#,
        left + pw / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">Reaction time (ms)</text>"#,
        top + ph / 2.0
    );

    for (i, c) in report.conditions.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts = points(c);
        let _ = writeln!(
            s,
            r#"<g class="series" data-condition="{}" stroke="{color}" fill="{color}">"#,
            c.condition
        );
        let path: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y, se) in &pts {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}"/><circle cx="{0:.1}" cy="{3:.1}" r="3.5"/>"#,
                sx(x),
                sy(y - se),
                sy(y + se),
                sy(y)
            );
        }
        let ly = top + 20.0 + 22.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke-width="2"/><text x="{:.1}" y="{:.1}" stroke="none">{} ({})</text>"#,
            W - right + 12.0,
            W - right + 32.0,
            W - right + 38.0,
            ly + 4.0,
            c.condition,
            if c.hard { "hard" } else { "easy" }
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn searcher_name(report: &ExperimentReport) -> String {
    serde_json::to_value(report.metadata.searcher)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Rounds up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(v: f64) -> f64 {
    let p = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * p)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * p)
}
