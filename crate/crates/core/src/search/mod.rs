//! Fixation sequence: winner-take-all over the attention map with infinite
//! inhibition of return and oracle recognition of the target box.

mod trial;

use alloc::vec;
use alloc::vec::Vec;

pub use trial::{run_trial, run_trial_observed, FixationEvent, SearchOptions, Searcher, TargetFeatures};

use crate::stimuli::Rect;
use crate::{Error, Result, Tensor};

/// Image pixels per attention-map cell (cumulative stride at layer 17).
pub const CELL_PX: usize = 16;

/// Hard cap on fixations per trial.
pub const MAX_FIXATIONS_CAP: usize = 500;

/// Fixation history plus the inhibited cells of the attention map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixationState {
    map_dims: (usize, usize),
    history: Vec<(usize, usize)>,
    ior: Vec<bool>,
}

impl FixationState {
    pub fn new(map_h: usize, map_w: usize) -> Self {
        FixationState {
            map_dims: (map_h, map_w),
            history: Vec::new(),
            ior: vec![false; map_h * map_w],
        }
    }

    pub fn n(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[(usize, usize)] {
        &self.history
    }

    pub fn ior_mask(&self) -> &[bool] {
        &self.ior
    }

    pub fn is_inhibited(&self, (r, c): (usize, usize)) -> bool {
        self.ior[r * self.map_dims.1 + c]
    }

    /// Records a fixation on `cell` at image pixel `fixation`.
    pub fn fixate(&mut self, cell: (usize, usize), fixation: (usize, usize)) -> Result<()> {
        let (h, w) = self.map_dims;
        if cell.0 >= h || cell.1 >= w {
            return Err(Error::OutOfBounds {
                op: "fixate",
                row: cell.0,
                col: cell.1,
                height: h,
                width: w,
            });
        }
        let slot = &mut self.ior[cell.0 * w + cell.1];
        if *slot {
            return Err(Error::invalid(alloc::format!("cell {cell:?} fixated twice")));
        }
        *slot = true;
        self.history.push(fixation);
        Ok(())
    }
}

/// Location of the largest unmasked value; ties go to the smallest row, then
/// the smallest column.
pub fn winner_take_all(map: &Tensor, ior: &[bool]) -> Result<(usize, usize)> {
    if map.channels() != 1 || ior.len() != map.plane_len() {
        return Err(Error::shape(
            "winner_take_all",
            format_args!("single-channel map with {} mask cells", ior.len()),
            format_args!("{:?}", map.dims()),
        ));
    }
    let mut best: Option<(usize, f32)> = None;
    for (i, (&v, &masked)) in map.data().iter().zip(ior).enumerate() {
        if masked {
            continue;
        }
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    let (i, _) = best.ok_or(Error::FullyInhibited)?;
    Ok((i / map.width(), i % map.width()))
}

/// Centre of the image patch a cell projects back to. Edge cells that hang
/// over the image border are centred on the part inside it.
pub fn to_image_coords(cell: (usize, usize), image_dims: (usize, usize)) -> (usize, usize) {
    let axis = |i: usize, len: usize| {
        let start = i * CELL_PX;
        start + CELL_PX.min(len.saturating_sub(start)) / 2
    };
    (axis(cell.0, image_dims.0), axis(cell.1, image_dims.1))
}

/// Cell containing an image pixel.
pub fn to_cell(pixel: (usize, usize)) -> (usize, usize) {
    (pixel.0 / CELL_PX, pixel.1 / CELL_PX)
}

/// Oracle recognition: is the fixation on the target's box?
pub fn oracle_check(fixation: (usize, usize), target_box: &Rect) -> bool {
    target_box.contains(fixation)
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialResult {
    pub found: bool,
    pub n_fixations: usize,
    /// Only set when the target was found.
    pub rt_ms: Option<f64>,
    /// Image pixels, excluding the initial central fixation.
    pub scanpath: Vec<(usize, usize)>,
    pub capped: bool,
}
