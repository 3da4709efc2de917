//! VGG16-shaped feature extractor whose pooling stages are
//! eccentricity-dependent.

mod arch;
mod rf_profile;

use alloc::string::String;
use alloc::vec::Vec;

pub use arch::{
    conv_names, input_stride, layer_dims, pools_before, vgg16_widths, LayerKind, LayerSpec, CONV_COUNT, KERNEL_SIZE,
    VGG16_LAYERS,
};
pub use rf_profile::{estimate_rf_profile, RfPoint, REFERENCE_RF_TABLE};

use crate::ops::{avg_pool_2x2, conv2d, ecc_avg_pool, relu, EccPoolConfig, Padding};
use crate::{Error, Filter, Result, Tensor, PX_PER_DVA};

/// Fovea radius in dva. The window-size rule reproduces every row of
/// [`REFERENCE_RF_TABLE`] only for radii in about [4.234, 4.366].
pub const FOVEA_DVA: f64 = 4.25;

pub const POOL_LAYERS: [u8; 5] = [3, 6, 10, 14, 18];
pub const TAP_LAYERS: [u8; 3] = [9, 13, 17];
const GAMMAS: [f64; 5] = [0.0, 0.0, 0.14, 0.32, 0.64];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackboneConfig {
    pub gammas: [f64; 5],
    pub delta: f64,
    pub px_per_dva: f64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            gammas: GAMMAS,
            delta: FOVEA_DVA,
            px_per_dva: PX_PER_DVA,
        }
    }
}

impl BackboneConfig {
    fn pool_index(layer_id: u8) -> Result<usize> {
        POOL_LAYERS
            .iter()
            .position(|&p| p == layer_id)
            .ok_or_else(|| Error::invalid(alloc::format!("layer {layer_id} is not a pooling layer")))
    }

    /// Output-grid pixels per dva of pooling layer `layer_id`:
    /// `px_per_dva / 2^k` after the layer's `k`-th stride-2 stage.
    pub fn eta(&self, layer_id: u8) -> Result<f64> {
        let k = Self::pool_index(layer_id)? as i32 + 1;
        Ok(self.px_per_dva / libm::pow(2.0, k as f64))
    }

    pub fn pool_config(&self, layer_id: u8) -> Result<EccPoolConfig> {
        let i = Self::pool_index(layer_id)?;
        EccPoolConfig::new(self.gammas[i], self.eta(layer_id)?, self.delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum ChannelOrder {
    Rgb,
    Bgr,
}

/// Input normalisation recorded alongside the weights:
/// `value * scale - per_channel_mean[c]`, channels in `channel_order`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preprocessing {
    pub channel_order: ChannelOrder,
    pub per_channel_mean: [f32; 3],
    pub scale: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub filter: Filter,
    pub bias: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PoolMode {
    /// Eccentricity-dependent pooling around the fixation.
    Eccentric,
    /// Plain 2x2 average pooling everywhere (target image, no-ecc ablation).
    Uniform,
}

/// Feature maps at the taps used by attention.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    pub l9: Tensor,
    pub l10: Tensor,
    pub l13: Tensor,
    pub l14: Tensor,
    pub l17: Tensor,
    pub l18: Tensor,
}

impl FeatureStack {
    pub fn layer(&self, id: u8) -> Option<&Tensor> {
        match id {
            9 => Some(&self.l9),
            10 => Some(&self.l10),
            13 => Some(&self.l13),
            14 => Some(&self.l14),
            17 => Some(&self.l17),
            18 => Some(&self.l18),
            _ => None,
        }
    }
}

/// Activations up to (and including) the last layer that does not depend on
/// the fixation, plus any taps already passed.
#[derive(Clone, Debug)]
pub struct Prefix {
    image_dims: (usize, usize),
    next_layer: usize,
    activations: Tensor,
    taps: [Option<Tensor>; 6],
}

impl Prefix {
    pub fn image_dims(&self) -> (usize, usize) {
        self.image_dims
    }

    /// Id of the last layer computed.
    pub fn last_layer(&self) -> u8 {
        if self.next_layer == 0 {
            0
        } else {
            VGG16_LAYERS[self.next_layer - 1].id
        }
    }
}

const STACK_IDS: [u8; 6] = [9, 10, 13, 14, 17, 18];

fn stack_slot(id: u8) -> Option<usize> {
    STACK_IDS.iter().position(|&s| s == id)
}

#[derive(Clone, Debug)]
pub struct Backbone {
    convs: Vec<ConvLayer>,
    preprocessing: Preprocessing,
    config: BackboneConfig,
}

impl Backbone {
    /// Validates the thirteen convolutions (3x3 kernels, channel chain starting
    /// at 3 input channels) in layer order.
    pub fn new(convs: Vec<ConvLayer>, preprocessing: Preprocessing, config: BackboneConfig) -> Result<Self> {
        if convs.len() != CONV_COUNT {
            return Err(Error::shape(
                "backbone",
                format_args!("{CONV_COUNT} conv layers"),
                format_args!("{} conv layers", convs.len()),
            ));
        }
        let mut in_ch = 3;
        for (layer, name) in convs.iter().zip(conv_names()) {
            let f = &layer.filter;
            if layer.name != name {
                return Err(Error::invalid(alloc::format!(
                    "conv layer out of order: expected {name}, got {}",
                    layer.name
                )));
            }
            if f.kh() != KERNEL_SIZE || f.kw() != KERNEL_SIZE || f.in_channels() != in_ch {
                return Err(Error::shape(
                    "backbone",
                    format_args!("{name}: [_, {in_ch}, 3, 3]"),
                    format_args!("[{}, {}, {}, {}]", f.out_channels(), f.in_channels(), f.kh(), f.kw()),
                ));
            }
            if layer.bias.len() != f.out_channels() {
                return Err(Error::shape(
                    "backbone",
                    format_args!("{name} bias [{}]", f.out_channels()),
                    format_args!("[{}]", layer.bias.len()),
                ));
            }
            in_ch = f.out_channels();
        }
        for p in POOL_LAYERS {
            config.pool_config(p)?;
        }
        Ok(Backbone {
            convs,
            preprocessing,
            config,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn with_config(mut self, config: BackboneConfig) -> Result<Self> {
        for p in POOL_LAYERS {
            config.pool_config(p)?;
        }
        self.config = config;
        Ok(self)
    }

    pub fn preprocessing(&self) -> &Preprocessing {
        &self.preprocessing
    }

    pub fn convs(&self) -> &[ConvLayer] {
        &self.convs
    }

    pub fn parameter_count(&self) -> usize {
        self.convs.iter().map(|c| c.filter.data().len() + c.bias.len()).sum()
    }

    /// Converts a 1- or 3-channel image with values in `[0, 255]` (RGB order
    /// for colour input) into the network's input convention.
    pub fn preprocess(&self, image: &Tensor) -> Result<Tensor> {
        let (c, h, w) = image.dims();
        if c != 1 && c != 3 {
            return Err(Error::shape("preprocess", "1 or 3 channels", c));
        }
        if let Some(&bad) = image.data().iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::ValueRange {
                op: "preprocess",
                value: bad,
                min: 0.0,
                max: 255.0,
            });
        }
        let p = &self.preprocessing;
        Ok(Tensor::from_fn(3, h, w, |ch, y, x| {
            let src = if c == 1 {
                0
            } else {
                match p.channel_order {
                    ChannelOrder::Rgb => ch,
                    ChannelOrder::Bgr => 2 - ch,
                }
            };
            image.get(src, y, x) * p.scale - p.per_channel_mean[ch]
        }))
    }

    fn conv_layer(&self, index: usize, x: &Tensor) -> Result<Tensor> {
        let layer = &self.convs[index];
        Ok(relu(&conv2d(x, &layer.filter, &layer.bias, Padding::Same)?))
    }

    fn pool_layer(&self, id: u8, x: &Tensor, fixation: (usize, usize), mode: PoolMode) -> Result<Tensor> {
        let cfg = self.config.pool_config(id)?;
        if mode == PoolMode::Uniform || cfg.gamma == 0.0 {
            return Ok(avg_pool_2x2(x));
        }
        let s = input_stride(id);
        let fix = (
            (fixation.0 / s).min(x.height() - 1),
            (fixation.1 / s).min(x.width() - 1),
        );
        ecc_avg_pool(x, &cfg, fix)
    }

    fn is_fixation_dependent(&self, spec: &LayerSpec, mode: PoolMode) -> bool {
        match (spec.kind, mode) {
            (LayerKind::Pool, PoolMode::Eccentric) => {
                self.config.pool_config(spec.id).map(|c| c.gamma != 0.0).unwrap_or(true)
            }
            _ => false,
        }
    }

    fn run_layers(&self, mut prefix: Prefix, until: usize, fixation: (usize, usize), mode: PoolMode) -> Result<Prefix> {
        let mut x = prefix.activations;
        for spec in &VGG16_LAYERS[prefix.next_layer..until] {
            x = match spec.kind {
                LayerKind::Conv { index, .. } => self.conv_layer(index, &x)?,
                LayerKind::Pool => self.pool_layer(spec.id, &x, fixation, mode)?,
            };
            if let Some(slot) = stack_slot(spec.id) {
                prefix.taps[slot] = Some(x.clone());
            }
        }
        prefix.activations = x;
        prefix.next_layer = until;
        Ok(prefix)
    }

    /// Runs every layer that cannot depend on the fixation for `mode`.
    pub fn prefix(&self, input: &Tensor, mode: PoolMode) -> Result<Prefix> {
        if input.channels() != 3 {
            return Err(Error::shape(
                "extract",
                "3-channel preprocessed input",
                input.channels(),
            ));
        }
        let until = VGG16_LAYERS
            .iter()
            .position(|l| self.is_fixation_dependent(l, mode))
            .unwrap_or(VGG16_LAYERS.len());
        let start = Prefix {
            image_dims: (input.height(), input.width()),
            next_layer: 0,
            activations: input.clone(),
            taps: Default::default(),
        };
        self.run_layers(start, until, (0, 0), mode)
    }

    /// Continues from a cached prefix at `fixation` (image pixels).
    pub fn extract_from(&self, prefix: &Prefix, fixation: (usize, usize), mode: PoolMode) -> Result<FeatureStack> {
        let (h, w) = prefix.image_dims;
        if fixation.0 >= h || fixation.1 >= w {
            return Err(Error::OutOfBounds {
                op: "extract",
                row: fixation.0,
                col: fixation.1,
                height: h,
                width: w,
            });
        }
        let done = self.run_layers(prefix.clone(), VGG16_LAYERS.len(), fixation, mode)?;
        let [l9, l10, l13, l14, l17, l18] = done.taps.map(|t| t.expect("all taps computed"));
        Ok(FeatureStack {
            l9,
            l10,
            l13,
            l14,
            l17,
            l18,
        })
    }

    /// Full forward pass of a preprocessed image.
    pub fn extract(&self, input: &Tensor, fixation: (usize, usize), mode: PoolMode) -> Result<FeatureStack> {
        let prefix = self.prefix(input, mode)?;
        self.extract_from(&prefix, fixation, mode)
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(3, h, w, |_, _, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn etas_halve_per_stage() {
        let cfg = BackboneConfig::default();
        let etas: Vec<f64> = POOL_LAYERS.iter().map(|&l| cfg.eta(l).unwrap()).collect();
        assert_eq!(etas, [15.0, 7.5, 3.75, 1.875, 0.9375]);
        assert!(cfg.eta(9).is_err());
    }

    #[test]
    fn tap_dims_follow_strides() {
        let bb = random_backbone(1, NARROW);
        let fs = bb
            .extract(&random_image(2, 50, 37), (10, 10), PoolMode::Eccentric)
            .unwrap();
        assert_eq!((fs.l9.height(), fs.l9.width()), (13, 10));
        assert_eq!((fs.l13.height(), fs.l13.width()), (7, 5));
        assert_eq!((fs.l17.height(), fs.l17.width()), (4, 3));
        assert_eq!((fs.l18.height(), fs.l18.width()), (2, 2));
        assert_eq!(fs.l9.channels(), 8);
    }

    #[test]
    fn extraction_is_deterministic() {
        let bb = random_backbone(3, NARROW);
        let img = random_image(4, 40, 40);
        let a = bb.extract(&img, (5, 30), PoolMode::Eccentric).unwrap();
        let b = bb.extract(&img, (5, 30), PoolMode::Eccentric).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixation_only_moves_eccentric_stages() {
        let bb = random_backbone(5, NARROW);
        // Large enough that units at layers 10-18 leave the fovea.
        let img = random_image(6, 256, 256);
        let a = bb.extract(&img, (2, 2), PoolMode::Eccentric).unwrap();
        let b = bb.extract(&img, (250, 250), PoolMode::Eccentric).unwrap();
        assert_eq!(a.l9, b.l9);
        assert_ne!(a.l10, b.l10);
        assert_ne!(a.l17, b.l17);

        let u1 = bb.extract(&img, (2, 2), PoolMode::Uniform).unwrap();
        let u2 = bb.extract(&img, (250, 250), PoolMode::Uniform).unwrap();
        assert_eq!(u1, u2);
    }

    #[test]
    fn prefix_stops_before_first_eccentric_pool() {
        let bb = random_backbone(7, NARROW);
        let img = random_image(8, 32, 32);
        assert_eq!(bb.prefix(&img, PoolMode::Eccentric).unwrap().last_layer(), 9);
        assert_eq!(bb.prefix(&img, PoolMode::Uniform).unwrap().last_layer(), 18);
        let cached = bb.prefix(&img, PoolMode::Eccentric).unwrap();
        assert_eq!(
            bb.extract_from(&cached, (30, 1), PoolMode::Eccentric).unwrap(),
            bb.extract(&img, (30, 1), PoolMode::Eccentric).unwrap()
        );
    }

    #[test]
    fn zero_input_gives_constant_taps() {
        let bb = random_backbone(9, NARROW);
        // 3x3 kernels see zero padding at the borders, so use centre-tap
        // kernels: every plane must then be exactly constant.
        let mut convs = bb.convs().to_vec();
        for c in convs.iter_mut() {
            let f = &c.filter;
            c.filter = Filter::from_vec(
                f.out_channels(),
                f.in_channels(),
                3,
                3,
                f.data()
                    .chunks(9)
                    .flat_map(|k| [0.0, 0.0, 0.0, 0.0, k[4], 0.0, 0.0, 0.0, 0.0])
                    .collect(),
            )
            .unwrap();
        }
        let centre_only = Backbone::new(convs, identity_preprocessing(), BackboneConfig::default()).unwrap();
        let fs = centre_only
            .extract(&Tensor::zeros(3, 40, 40), (20, 20), PoolMode::Eccentric)
            .unwrap();
        for id in STACK_IDS {
            let t = fs.layer(id).unwrap();
            for c in 0..t.channels() {
                let p = t.plane(c);
                assert!(p.iter().all(|&v| v == p[0]), "layer {id} channel {c}");
            }
        }
    }

    #[test]
    fn preprocess_examples() {
        let mut bb = random_backbone(10, NARROW);
        bb.preprocessing = Preprocessing {
            channel_order: ChannelOrder::Bgr,
            per_channel_mean: [103.939, 116.779, 123.68],
            scale: 1.0,
        };
        let zeros = bb.preprocess(&Tensor::zeros(1, 2, 2)).unwrap();
        for (c, m) in [103.939f32, 116.779, 123.68].into_iter().enumerate() {
            assert!(zeros.plane(c).iter().all(|&v| v == -m));
        }
        // Colour input equal to the mean, given in RGB.
        let rgb = [123.68f32, 116.779, 103.939];
        let img = Tensor::from_fn(3, 2, 3, |c, _, _| rgb[c]);
        assert!(bb.preprocess(&img).unwrap().data().iter().all(|&v| v == 0.0));
        let bad = Tensor::filled(1, 1, 1, 256.0);
        assert!(matches!(bb.preprocess(&bad), Err(Error::ValueRange { .. })));
        assert!(bb.preprocess(&Tensor::zeros(2, 1, 1)).is_err());
    }

    #[test]
    fn constructor_rejects_bad_chains() {
        let bb = random_backbone(11, NARROW);
        let mut convs = bb.convs().to_vec();
        convs.pop();
        assert!(Backbone::new(convs, identity_preprocessing(), BackboneConfig::default()).is_err());

        let mut convs = bb.convs().to_vec();
        convs.swap(0, 1);
        assert!(Backbone::new(convs, identity_preprocessing(), BackboneConfig::default()).is_err());

        let mut convs = bb.convs().to_vec();
        convs[3].bias.push(0.0);
        assert!(Backbone::new(convs, identity_preprocessing(), BackboneConfig::default()).is_err());
    }

    #[test]
    fn full_vgg16_parameter_count() {
        // 3x3 kernels plus biases over the standard widths.
        let widths = vgg16_widths();
        let mut in_ch = 3;
        let mut total = 0;
        for w in widths {
            total += w * in_ch * 9 + w;
            in_ch = w;
        }
        assert_eq!(total, 14_714_688);
    }
}
