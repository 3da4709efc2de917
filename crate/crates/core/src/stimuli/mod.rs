//! Target and search displays for the six search-asymmetry experiments.
//!
//! All sizes are converted at [`PX_PER_DVA`] with
//! round-half-up. Items sit in distinct cells of a square grid, randomly
//! shifted inside their cell, so boxes never overlap.

mod raster;

use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use raster::{arc, arms, bar, edge_contacts, ramp_disc, Arm, Patch};

use crate::{math, Error, Result, Tensor, PX_PER_DVA};

/// Degrees of visual angle to whole pixels.
pub fn dva_to_px(dva: f64) -> usize {
    math::round_half_up(dva * PX_PER_DVA) as usize
}

/// Axis-aligned pixel rectangle; `contains` treats every edge as inside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Rect {
            top,
            left,
            height,
            width,
        }
    }

    /// Last row inside the box.
    pub fn bottom(&self) -> usize {
        self.top + self.height - 1
    }

    /// Last column inside the box.
    pub fn right(&self) -> usize {
        self.left + self.width - 1
    }

    pub fn contains(&self, (y, x): (usize, usize)) -> bool {
        (self.top..=self.bottom()).contains(&y) && (self.left..=self.right()).contains(&x)
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.top <= other.bottom()
            && other.top <= self.bottom()
            && self.left <= other.right()
            && other.left <= self.right()
    }

    pub fn within(&self, height: usize, width: usize) -> bool {
        self.top + self.height <= height && self.left + self.width <= width
    }

    pub fn center(&self) -> (usize, usize) {
        (self.top + self.height / 2, self.left + self.width / 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Experiment {
    Curvature,
    Lighting,
    Intersection,
    Junction,
    Orientation,
    HeteroOrientation,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Curvature,
        Experiment::Lighting,
        Experiment::Intersection,
        Experiment::Junction,
        Experiment::Orientation,
        Experiment::HeteroOrientation,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Result<Self> {
        Experiment::ALL
            .get((n as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::invalid(alloc::format!("experiment must be 1-6, got {n}")))
    }

    /// `[hard, easy]`.
    pub fn conditions(self) -> [Condition; 2] {
        use Condition::*;
        match self {
            Experiment::Curvature => [LineAmongCurves, CurveAmongLines],
            Experiment::Lighting => [LeftRight, TopDown],
            Experiment::Intersection => [CrossAmongNonCross, NonCrossAmongCross],
            Experiment::Junction => [LAmongT, TAmongL],
            Experiment::Orientation => [VerticalAmong20, TiltedAmongVertical],
            Experiment::HeteroOrientation => [HeteroT20, HeteroTvert],
        }
    }

    pub fn plan(self) -> ExperimentPlan {
        let (image_dva, grid, set_sizes, trials, item_dva): (f64, usize, &'static [usize], usize, f64) = match self {
            Experiment::Curvature => (11.3, 6, &[8, 16, 32], 90, CURVE_FOOTPRINT_DVA),
            Experiment::Lighting => (6.6, 4, &[1, 6, 12], 90, LIGHTING_DIAMETER_DVA),
            Experiment::Intersection | Experiment::Junction => (20.5, 3, &[3, 6, 9], 108, 5.5),
            Experiment::Orientation | Experiment::HeteroOrientation => (11.3, 4, &[1, 4, 8, 12], 120, 2.3),
        };
        ExperimentPlan {
            experiment: self,
            conditions: self.conditions(),
            set_sizes,
            trials_per_condition: trials,
            image_px: dva_to_px(image_dva),
            grid,
            item_px: dva_to_px(item_dva),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Side of the square that holds an Exp 1 item: the arc's chord plus one
/// stroke width.
const CURVE_FOOTPRINT_DVA: f64 = 1.3 + 0.18;
const LIGHTING_DIAMETER_DVA: f64 = 1.04;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Condition {
    LineAmongCurves,
    CurveAmongLines,
    LeftRight,
    TopDown,
    CrossAmongNonCross,
    NonCrossAmongCross,
    LAmongT,
    TAmongL,
    VerticalAmong20,
    TiltedAmongVertical,
    HeteroT20,
    HeteroTvert,
}

impl Condition {
    pub const ALL: [Condition; 12] = [
        Condition::LineAmongCurves,
        Condition::CurveAmongLines,
        Condition::LeftRight,
        Condition::TopDown,
        Condition::CrossAmongNonCross,
        Condition::NonCrossAmongCross,
        Condition::LAmongT,
        Condition::TAmongL,
        Condition::VerticalAmong20,
        Condition::TiltedAmongVertical,
        Condition::HeteroT20,
        Condition::HeteroTvert,
    ];

    pub fn experiment(self) -> Experiment {
        Experiment::ALL[self as usize / 2]
    }

    /// Condition letter: a/b, or c/d for the second experiment of a shared
    /// design.
    pub fn letter(self) -> char {
        let second_pair = matches!(self.experiment(), Experiment::Junction | Experiment::HeteroOrientation);
        let base = if second_pair { b'c' } else { b'a' };
        (base + (self as u8 % 2)) as char
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::LineAmongCurves => "line_among_curves",
            Condition::CurveAmongLines => "curve_among_lines",
            Condition::LeftRight => "left_right",
            Condition::TopDown => "top_down",
            Condition::CrossAmongNonCross => "cross_among_noncross",
            Condition::NonCrossAmongCross => "noncross_among_cross",
            Condition::LAmongT => "L_among_T",
            Condition::TAmongL => "T_among_L",
            Condition::VerticalAmong20 => "vertical_among_20",
            Condition::TiltedAmongVertical => "20_among_vertical",
            Condition::HeteroT20 => "hetero_T20",
            Condition::HeteroTvert => "hetero_Tvert",
        }
    }

    /// The condition people find harder (steeper RT slope).
    pub fn is_hard(self) -> bool {
        self.experiment().conditions()[0] == self
    }

    /// Accepts the letter or the name.
    pub fn parse(experiment: Experiment, s: &str) -> Result<Self> {
        experiment
            .conditions()
            .into_iter()
            .find(|c| s.len() == 1 && s.starts_with(c.letter()) || s.eq_ignore_ascii_case(c.name()))
            .ok_or_else(|| Error::invalid(alloc::format!("experiment {experiment} has no condition {s:?}")))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometry and trial counts of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub experiment: Experiment,
    pub conditions: [Condition; 2],
    pub set_sizes: &'static [usize],
    pub trials_per_condition: usize,
    pub image_px: usize,
    pub grid: usize,
    pub item_px: usize,
}

/// Index, set size and seed of one planned trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedTrial {
    pub condition: Condition,
    pub index: usize,
    pub set_size: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn with_trials(mut self, trials_per_condition: usize) -> Self {
        self.trials_per_condition = trials_per_condition;
        self
    }

    /// Trials of one condition, set sizes taken in turn so they are equally
    /// represented.
    pub fn trials(&self, condition: Condition, master_seed: u64) -> impl Iterator<Item = PlannedTrial> + '_ {
        (0..self.trials_per_condition).map(move |index| PlannedTrial {
            condition,
            index,
            set_size: self.set_sizes[index % self.set_sizes.len()],
            seed: trial_seed(master_seed, condition, index),
        })
    }

    /// Top-left corners of the grid cells' row/column bands.
    pub fn cell_edges(&self) -> Vec<usize> {
        (0..=self.grid).map(|i| i * self.image_px / self.grid).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed mixed from the master seed, the condition and the trial
/// index.
pub fn trial_seed(master: u64, condition: Condition, index: usize) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(condition as u64 + 1)) ^ index as u64)
}

/// One target-present display.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec {
    pub condition: Condition,
    pub set_size: usize,
    pub seed: u64,
    /// Single-channel, values in `[0, 255]`.
    pub search_image: Tensor,
    pub target_image: Tensor,
    pub target_box: Rect,
    pub item_boxes: Vec<Rect>,
    pub target_index: usize,
    /// Clockwise rotation of each item in degrees.
    pub item_angles: Vec<i32>,
}

impl TrialSpec {
    pub fn experiment(&self) -> Experiment {
        self.condition.experiment()
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.search_image.height(), self.search_image.width())
    }
}

struct Item {
    patch: Patch,
    angle: i32,
}

/// Places `items` (the first one is the target) in distinct random cells.
fn compose(
    plan: &ExperimentPlan,
    condition: Condition,
    seed: u64,
    rng: &mut ChaCha8Rng,
    items: Vec<Item>,
    target_image: Patch,
    background: u8,
) -> Result<TrialSpec> {
    let n = items.len();
    if n == 0 || n > plan.grid * plan.grid {
        return Err(Error::invalid(alloc::format!(
            "{n} items do not fit a {g}x{g} grid",
            g = plan.grid
        )));
    }
    let edges = plan.cell_edges();
    let mut cells: Vec<usize> = (0..plan.grid * plan.grid).collect();
    cells.shuffle(rng);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut canvas = Patch::filled(plan.image_px, plan.image_px, background);
    let mut boxes = alloc::vec![Rect::new(0, 0, 0, 0); n];
    let mut angles = alloc::vec![0; n];
    for (item, &slot) in items.iter().zip(&order) {
        let cell = cells[slot];
        let (r, c) = (cell / plan.grid, cell % plan.grid);
        let (h, w) = (item.patch.height(), item.patch.width());
        let top = edges[r] + rng.random_range(0..=edges[r + 1] - edges[r] - h);
        let left = edges[c] + rng.random_range(0..=edges[c + 1] - edges[c] - w);
        canvas.paste(&item.patch, top, left);
        boxes[slot] = Rect::new(top, left, h, w);
        angles[slot] = item.angle;
    }
    Ok(TrialSpec {
        condition,
        set_size: n,
        seed,
        search_image: canvas.to_tensor(),
        target_image: target_image.to_tensor(),
        target_box: boxes[order[0]],
        item_boxes: boxes,
        target_index: order[0],
        item_angles: angles,
    })
}

fn check_set_size(plan: &ExperimentPlan, set_size: usize) -> Result<()> {
    if plan.set_sizes.contains(&set_size) {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!(
            "experiment {} uses set sizes {:?}, got {set_size}",
            plan.experiment,
            plan.set_sizes
        )))
    }
}

fn check_experiment(condition: Condition, expected: &[Experiment]) -> Result<()> {
    if expected.contains(&condition.experiment()) {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!(
            "condition {condition} belongs to another generator"
        )))
    }
}

const FG: u8 = 255;
const BG: u8 = 0;

/// Straight lines and arcs in one of four orientations.
pub fn gen_curvature(condition: Condition, set_size: usize, seed: u64) -> Result<TrialSpec> {
    check_experiment(condition, &[Experiment::Curvature])?;
    let plan = Experiment::Curvature.plan();
    check_set_size(&plan, set_size)?;
    let (n, stroke) = (plan.item_px, dva_to_px(0.18) as f64);
    let line = |deg: f64| bar(n, dva_to_px(1.2) as f64, stroke, deg, FG, BG);
    let curve = |deg: f64| arc(n, PX_PER_DVA, dva_to_px(1.3) as f64, stroke, deg, FG, BG);
    let target_is_line = condition == Condition::LineAmongCurves;
    let draw = |is_line: bool, deg: f64| if is_line { line(deg) } else { curve(deg) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..set_size)
        .map(|i| {
            let angle = [-45, 0, 45, 90][rng.random_range(0..4)];
            Item {
                patch: draw((i == 0) == target_is_line, angle as f64),
                angle,
            }
        })
        .collect();
    compose(&plan, condition, seed, &mut rng, items, draw(target_is_line, 0.0), BG)
}

/// Discs with a 16-level luminance ramp on a grey background.
pub fn gen_lighting(condition: Condition, set_size: usize, seed: u64) -> Result<TrialSpec> {
    check_experiment(condition, &[Experiment::Lighting])?;
    let plan = Experiment::Lighting.plan();
    check_set_size(&plan, set_size)?;
    let background = 27;
    // Dark on the left, bright on the right.
    let left_right = ramp_disc(plan.item_px, 16, 17, background);
    let right_left = left_right.rotated(2);
    let (target, distractor) = match condition {
        Condition::LeftRight => (left_right, right_left),
        _ => (left_right.rot90cw(), right_left.rot90cw()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..set_size)
        .map(|i| Item {
            patch: if i == 0 { target.clone() } else { distractor.clone() },
            angle: 0,
        })
        .collect();
    compose(&plan, condition, seed, &mut rng, items, target, background)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shape {
    Cross,
    NonCross,
    L,
    T,
}

fn intersection_item(shape: Shape, n: usize, stroke: usize) -> Patch {
    use Arm::*;
    let parts: &[(Arm, isize)] = match shape {
        Shape::Cross => &[(Up, 0), (Down, 0), (Left, 0), (Right, 0)],
        Shape::NonCross => &[(Up, 0), (Down, 0), (Left, -((n / 4) as isize)), (Right, 0)],
        Shape::L => &[(Up, 0), (Right, 0)],
        Shape::T => &[(Left, 0), (Right, 0), (Down, 0)],
    };
    arms(n, stroke, parts, FG, BG)
}

/// Crosses, non-crosses, Ls and Ts in one of four quarter-turn orientations.
pub fn gen_intersections(condition: Condition, set_size: usize, seed: u64) -> Result<TrialSpec> {
    check_experiment(condition, &[Experiment::Intersection, Experiment::Junction])?;
    let plan = condition.experiment().plan();
    check_set_size(&plan, set_size)?;
    let (t, d) = match condition {
        Condition::CrossAmongNonCross => (Shape::Cross, Shape::NonCross),
        Condition::NonCrossAmongCross => (Shape::NonCross, Shape::Cross),
        Condition::LAmongT => (Shape::L, Shape::T),
        _ => (Shape::T, Shape::L),
    };
    let stroke = dva_to_px(0.55);
    let (target, distractor) = (
        intersection_item(t, plan.item_px, stroke),
        intersection_item(d, plan.item_px, stroke),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..set_size)
        .map(|i| {
            let q = rng.random_range(0..4u32);
            let base = if i == 0 { &target } else { &distractor };
            Item {
                patch: base.rotated(q),
                angle: 90 * q as i32,
            }
        })
        .collect();
    compose(&plan, condition, seed, &mut rng, items, target, BG)
}

pub const HETERO_T20_DISTRACTORS: [i32; 8] = [-80, -60, -40, -20, 0, 40, 60, 80];
pub const HETERO_TVERT_DISTRACTORS: [i32; 8] = [-80, -60, -40, -20, 20, 40, 60, 80];

/// `k` angles cycling through shuffled copies of `set`, so every angle
/// appears `floor(k / n)` or `ceil(k / n)` times.
pub fn balanced_angles(set: &[i32], k: usize, rng: &mut impl Rng) -> Vec<i32> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut round = set.to_vec();
        round.shuffle(rng);
        out.extend(round.into_iter().take(k - out.len()));
    }
    out
}

/// Bars at fixed tilts; homogeneous (Exp 5) or heterogeneous (Exp 6)
/// distractors.
pub fn gen_orientation(condition: Condition, set_size: usize, seed: u64) -> Result<TrialSpec> {
    check_experiment(condition, &[Experiment::Orientation, Experiment::HeteroOrientation])?;
    let plan = condition.experiment().plan();
    check_set_size(&plan, set_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = set_size - 1;
    let (target_angle, distractors) = match condition {
        Condition::VerticalAmong20 => (0, alloc::vec![20; k]),
        Condition::TiltedAmongVertical => (20, alloc::vec![0; k]),
        Condition::HeteroT20 => (20, balanced_angles(&HETERO_T20_DISTRACTORS, k, &mut rng)),
        _ => (0, balanced_angles(&HETERO_TVERT_DISTRACTORS, k, &mut rng)),
    };
    let (len, width) = (dva_to_px(2.0) as f64, dva_to_px(0.3) as f64);
    let draw = |deg: i32| bar(plan.item_px, len, width, deg as f64, FG, BG);
    let items = core::iter::once(target_angle)
        .chain(distractors)
        .map(|angle| Item {
            patch: draw(angle),
            angle,
        })
        .collect();
    compose(&plan, condition, seed, &mut rng, items, draw(target_angle), BG)
}

/// Dispatches to the generator for `condition`'s experiment.
pub fn generate(condition: Condition, set_size: usize, seed: u64) -> Result<TrialSpec> {
    match condition.experiment() {
        Experiment::Curvature => gen_curvature(condition, set_size, seed),
        Experiment::Lighting => gen_lighting(condition, set_size, seed),
        Experiment::Intersection | Experiment::Junction => gen_intersections(condition, set_size, seed),
        Experiment::Orientation | Experiment::HeteroOrientation => gen_orientation(condition, set_size, seed),
    }
}
