//! Small random backbones for tests and fixtures.

use eccnet_core::backbone::{conv_names, Backbone, BackboneConfig, ChannelOrder, ConvLayer, Preprocessing, CONV_COUNT};
use eccnet_core::Filter;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TINY_WIDTHS: [usize; CONV_COUNT] = [4, 4, 6, 6, 8, 8, 8, 8, 8, 8, 8, 8, 8];

/// He-scaled uniform kernels and small positive biases.
pub fn random_backbone(seed: u64, widths: [usize; CONV_COUNT], preprocessing: Preprocessing) -> Backbone {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_ch = 3;
    let convs = conv_names()
        .zip(widths)
        .map(|(name, out)| {
            let scale = (6.0 / (in_ch * 9) as f32).sqrt();
            let data = (0..out * in_ch * 9).map(|_| rng.random_range(-scale..scale)).collect();
            let bias = (0..out).map(|_| rng.random_range(0.0..0.05)).collect();
            let layer = ConvLayer {
                name: name.into(),
                filter: Filter::from_vec(out, in_ch, 3, 3, data).expect("sized kernel"),
                bias,
            };
            in_ch = out;
            layer
        })
        .collect();
    Backbone::new(convs, preprocessing, BackboneConfig::default()).expect("valid widths")
}

pub fn unit_preprocessing() -> Preprocessing {
    Preprocessing {
        channel_order: ChannelOrder::Rgb,
        per_channel_mean: [0.5; 3],
        scale: 1.0 / 255.0,
    }
}

pub fn tiny_backbone(seed: u64) -> Backbone {
    random_backbone(seed, TINY_WIDTHS, unit_preprocessing())
}
