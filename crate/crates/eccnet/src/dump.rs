//! Grayscale image dumps with JSON sidecars.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use eccnet_core::attention::{AttentionMap, FusionWeights};
use eccnet_core::ops::minmax_normalize;
use eccnet_core::search::FixationEvent;
use eccnet_core::stimuli::{Condition, Rect, TrialSpec};
use eccnet_core::Tensor;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::Serialize;

/// First channel of `t`, clamped to [0, 255] and rounded.
pub fn to_gray(t: &Tensor) -> Vec<u8> {
    t.plane(0).iter().map(|v| v.clamp(0.0, 255.0).round() as u8).collect()
}

/// First channel min-max stretched to [0, 255].
pub fn to_gray_stretched(t: &Tensor) -> Vec<u8> {
    let n = minmax_normalize(&Tensor::from_vec(1, t.height(), t.width(), t.plane(0).to_vec()).expect("plane"));
    n.data().iter().map(|v| (v * 255.0).round() as u8).collect()
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_pgm(path: &Path) -> anyhow::Result<(usize, usize, Vec<u8>)> {
    let img = image::ImageReader::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .with_guessed_format()?
        .decode()
        .with_context(|| format!("decoding {}", path.display()))?
        .into_luma8();
    Ok((img.height() as usize, img.width() as usize, img.into_raw()))
}

#[derive(Clone, Debug, Serialize)]
pub struct StimulusRecord {
    pub search_file: String,
    pub target_file: String,
    pub experiment: u8,
    pub condition: Condition,
    pub letter: char,
    pub set_size: usize,
    pub seed: u64,
    pub image_dims: (usize, usize),
    pub target_box: Rect,
    pub target_index: usize,
    pub item_boxes: Vec<Rect>,
    pub item_angles: Vec<i32>,
}

/// Writes `<stem>_search.pgm` and `<stem>_target.pgm`.
pub fn dump_trial(dir: &Path, stem: &str, spec: &TrialSpec) -> anyhow::Result<StimulusRecord> {
    let search_file = format!("{stem}_search.pgm");
    let target_file = format!("{stem}_target.pgm");
    let (h, w) = spec.image_dims();
    write_pgm(&dir.join(&search_file), w, h, &to_gray(&spec.search_image))?;
    let t = &spec.target_image;
    write_pgm(&dir.join(&target_file), t.width(), t.height(), &to_gray(t))?;
    Ok(StimulusRecord {
        search_file,
        target_file,
        experiment: spec.experiment().number(),
        condition: spec.condition,
        letter: spec.condition.letter(),
        set_size: spec.set_size,
        seed: spec.seed,
        image_dims: (h, w),
        target_box: spec.target_box,
        target_index: spec.target_index,
        item_boxes: spec.item_boxes.clone(),
        item_angles: spec.item_angles.clone(),
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Clone, Debug, Serialize)]
pub struct AttentionSidecar {
    pub trial_id: String,
    pub n: usize,
    pub from: (usize, usize),
    pub cell: (usize, usize),
    pub fixation: (usize, usize),
    pub found: bool,
    pub map_dims: (usize, usize),
    pub min: f32,
    pub max: f32,
    pub weights: Option<FusionWeights>,
}

/// Writes one fixation's attention map as a stretched PGM plus a JSON
/// sidecar; returns the image path.
pub fn dump_attention(dir: &Path, trial_id: &str, event: &FixationEvent<'_>) -> anyhow::Result<Option<PathBuf>> {
    let Some(AttentionMap { values, .. }) = event.attention else {
        return Ok(None);
    };
    let stem = format!("{trial_id}_fix{:03}", event.n);
    let path = dir.join(format!("{stem}.pgm"));
    write_pgm(&path, values.width(), values.height(), &to_gray_stretched(values))?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &AttentionSidecar {
            trial_id: trial_id.into(),
            n: event.n,
            from: event.from,
            cell: event.cell,
            fixation: event.fixation,
            found: event.found,
            map_dims: (values.height(), values.width()),
            min: values.min(),
            max: values.max(),
            weights: event.weights.cloned(),
        },
    )?;
    Ok(Some(path))
}
