use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{oracle_check, to_cell, to_image_coords, winner_take_all, FixationState, TrialResult, MAX_FIXATIONS_CAP};
use crate::analysis::RtModel;
use crate::attention::{
    blend, fuse, modulation_map, saliency_map, AttentionMap, BlendScheme, FusionWeights, LayerMap, DEFAULT_BINS,
};
use crate::backbone::{layer_dims, Backbone, FeatureStack, PoolMode, Prefix};
use crate::ops::{avg_pool_2x2, conv2d, minmax_normalize, Padding};
use crate::stimuli::TrialSpec;
use crate::{Error, Filter, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Searcher {
    EccNet,
    /// Random fixations on item locations.
    Chance,
    /// Raw-pixel template correlation.
    PixelMatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchOptions {
    pub use_saliency: bool,
    pub scheme: BlendScheme,
    /// Defaults to the number of attention-map cells, at most 500.
    pub max_fixations: Option<usize>,
    /// Uniform pooling in every stage.
    pub no_ecc: bool,
    /// Top-down modulation from layer 17 only.
    pub single_layer: bool,
    pub saliency_bins: usize,
    pub rt: RtModel,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            use_saliency: false,
            scheme: BlendScheme::NoSaliency,
            max_fixations: None,
            no_ecc: false,
            single_layer: false,
            saliency_bins: DEFAULT_BINS,
            rt: RtModel::default(),
        }
    }
}

impl SearchOptions {
    fn pool_mode(&self) -> PoolMode {
        if self.no_ecc {
            PoolMode::Uniform
        } else {
            PoolMode::Eccentric
        }
    }

    fn fixation_limit(&self, cells: usize) -> usize {
        self.max_fixations.unwrap_or(cells.min(MAX_FIXATIONS_CAP)).min(cells)
    }
}

/// Target features used as modulation kernels, from uniform pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetFeatures {
    pub l10: Tensor,
    pub l14: Tensor,
    pub l18: Tensor,
}

impl TargetFeatures {
    pub fn extract(backbone: &Backbone, target_image: &Tensor) -> Result<Self> {
        let input = backbone.preprocess(target_image)?;
        let centre = (input.height() / 2, input.width() / 2);
        let s = backbone.extract(&input, centre, PoolMode::Uniform)?;
        Ok(TargetFeatures {
            l10: s.l10,
            l14: s.l14,
            l18: s.l18,
        })
    }
}

/// What the observer sees after each fixation.
#[derive(Clone, Copy, Debug)]
pub struct FixationEvent<'a> {
    /// 1-based fixation count.
    pub n: usize,
    /// Where the eye was when the map was computed.
    pub from: (usize, usize),
    pub cell: (usize, usize),
    pub fixation: (usize, usize),
    pub found: bool,
    pub attention: Option<&'a AttentionMap>,
    pub weights: Option<&'a FusionWeights>,
}

pub fn run_trial(
    searcher: Searcher,
    backbone: Option<&Backbone>,
    trial: &TrialSpec,
    opts: &SearchOptions,
) -> Result<TrialResult> {
    run_trial_observed(searcher, backbone, trial, opts, None, &mut |_| {})
}

/// [`run_trial`] with optional precomputed target features and a callback per
/// fixation.
pub fn run_trial_observed(
    searcher: Searcher,
    backbone: Option<&Backbone>,
    trial: &TrialSpec,
    opts: &SearchOptions,
    target: Option<&TargetFeatures>,
    observer: &mut dyn FnMut(&FixationEvent<'_>),
) -> Result<TrialResult> {
    let dims = trial.image_dims();
    let (mh, mw) = layer_dims(17, dims.0, dims.1);
    let mut state = FixationState::new(mh, mw);
    let mut fix = (dims.0 / 2, dims.1 / 2);
    let limit = opts.fixation_limit(mh * mw);

    let mut picker = match searcher {
        Searcher::EccNet => {
            let backbone = backbone.ok_or_else(|| Error::invalid("the eccnet searcher needs a backbone"))?;
            Picker::EccNet(EccNetPicker::new(backbone, trial, opts, target)?)
        }
        Searcher::Chance => Picker::Chance(chance_order(trial, (mh, mw)).into_iter()),
        Searcher::PixelMatch => Picker::Fixed(pixel_match_map(trial)?),
    };

    let mut found = false;
    for n in 1..=limit {
        let (cell, att, weights) = match &mut picker {
            Picker::EccNet(p) => {
                let (att, w) = p.attention(n, fix)?;
                (winner_take_all(&att.values, state.ior_mask())?, Some(att), w)
            }
            Picker::Chance(order) => match order.next() {
                Some(c) => (c, None, None),
                None => break,
            },
            Picker::Fixed(map) => (winner_take_all(&map.values, state.ior_mask())?, None, None),
        };
        let next = to_image_coords(cell, dims);
        state.fixate(cell, next)?;
        found = oracle_check(next, &trial.target_box);
        observer(&FixationEvent {
            n,
            from: fix,
            cell,
            fixation: next,
            found,
            attention: att.as_ref().or(match &picker {
                Picker::Fixed(m) => Some(m),
                _ => None,
            }),
            weights: weights.as_ref(),
        });
        fix = next;
        if found {
            break;
        }
    }

    let n = state.n();
    Ok(TrialResult {
        found,
        n_fixations: n,
        rt_ms: found.then(|| opts.rt.rt_ms(n)),
        scanpath: state.history().to_vec(),
        capped: !found,
    })
}

enum Picker<'a> {
    EccNet(EccNetPicker<'a>),
    Chance(alloc::vec::IntoIter<(usize, usize)>),
    Fixed(AttentionMap),
}

struct EccNetPicker<'a> {
    backbone: &'a Backbone,
    prefix: Prefix,
    target: TargetFeatures,
    opts: &'a SearchOptions,
    /// Fused top-down map when it does not depend on the fixation.
    uniform: Option<(FeatureStack, AttentionMap, FusionWeights)>,
}

impl<'a> EccNetPicker<'a> {
    fn new(
        backbone: &'a Backbone,
        trial: &TrialSpec,
        opts: &'a SearchOptions,
        target: Option<&TargetFeatures>,
    ) -> Result<Self> {
        let target = match target {
            Some(t) => t.clone(),
            None => TargetFeatures::extract(backbone, &trial.target_image)?,
        };
        let input = backbone.preprocess(&trial.search_image)?;
        let prefix = backbone.prefix(&input, opts.pool_mode())?;
        Ok(EccNetPicker {
            backbone,
            prefix,
            target,
            opts,
            uniform: None,
        })
    }

    fn topdown(&self, stack: &FeatureStack, n: usize) -> Result<(AttentionMap, FusionWeights)> {
        let t = &self.target;
        let pairs: Vec<(u8, &Tensor, &Tensor)> = if self.opts.single_layer {
            alloc::vec![(17, &t.l18, &stack.l17)]
        } else {
            alloc::vec![
                (9, &t.l10, &stack.l9),
                (13, &t.l14, &stack.l13),
                (17, &t.l18, &stack.l17)
            ]
        };
        let maps = pairs
            .into_iter()
            .map(|(layer, k, s)| {
                Ok(LayerMap {
                    layer,
                    map: modulation_map(k, s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        fuse(&maps, n)
    }

    fn attention(&mut self, n: usize, fix: (usize, usize)) -> Result<(AttentionMap, Option<FusionWeights>)> {
        let mode = self.opts.pool_mode();
        let (stack, mut att, weights) = match (&self.uniform, mode) {
            (Some((s, a, w)), PoolMode::Uniform) => (s.clone(), a.clone(), w.clone()),
            _ => {
                let stack = self.backbone.extract_from(&self.prefix, fix, mode)?;
                let (a, w) = self.topdown(&stack, n)?;
                if mode == PoolMode::Uniform {
                    self.uniform = Some((stack.clone(), a.clone(), w.clone()));
                }
                (stack, a, w)
            }
        };
        att.fixation_index = n;
        if self.opts.use_saliency && self.opts.scheme.weights(n).0 > 0.0 {
            let sal = minmax_normalize(&saliency_map(&stack, self.opts.saliency_bins)?);
            let top = AttentionMap {
                values: minmax_normalize(&att.values),
                fixation_index: n,
            };
            att = blend(&top, &sal, self.opts.scheme, n)?;
        }
        Ok((att, Some(weights)))
    }
}

/// One cell per item, the one under the item's centre, in random order.
fn chance_order(trial: &TrialSpec, (mh, mw): (usize, usize)) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(trial.item_boxes.len());
    for b in &trial.item_boxes {
        let (r, c) = to_cell(b.center());
        let cell = (r.min(mh - 1), c.min(mw - 1));
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(trial.seed));
    cells
}

/// Raw-pixel correlation of the target over the display, averaged down to
/// attention-map resolution.
fn pixel_match_map(trial: &TrialSpec) -> Result<AttentionMap> {
    let scale = |t: &Tensor| t.map(|v| v / 255.0);
    let kernel = Filter::from_tensor(&scale(&trial.target_image));
    let mut map = conv2d(&scale(&trial.search_image), &kernel, &[0.0], Padding::Same)?;
    for _ in 0..4 {
        map = avg_pool_2x2(&map);
    }
    Ok(AttentionMap {
        values: map,
        fixation_index: 0,
    })
}
