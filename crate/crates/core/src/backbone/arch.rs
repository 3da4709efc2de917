/// One layer of the VGG16 feature stack, numbered as in Keras (input = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// 3x3 "same" convolution followed by ReLU; `index` counts convolutions
    /// from 0 to 12.
    Conv {
        index: usize,
        out_channels: usize,
    },
    Pool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: u8,
    pub name: &'static str,
    pub kind: LayerKind,
}

const fn conv(id: u8, name: &'static str, index: usize, out_channels: usize) -> LayerSpec {
    LayerSpec {
        id,
        name,
        kind: LayerKind::Conv { index, out_channels },
    }
}

const fn pool(id: u8, name: &'static str) -> LayerSpec {
    LayerSpec {
        id,
        name,
        kind: LayerKind::Pool,
    }
}

pub const VGG16_LAYERS: [LayerSpec; 18] = [
    conv(1, "block1_conv1", 0, 64),
    conv(2, "block1_conv2", 1, 64),
    pool(3, "block1_pool"),
    conv(4, "block2_conv1", 2, 128),
    conv(5, "block2_conv2", 3, 128),
    pool(6, "block2_pool"),
    conv(7, "block3_conv1", 4, 256),
    conv(8, "block3_conv2", 5, 256),
    conv(9, "block3_conv3", 6, 256),
    pool(10, "block3_pool"),
    conv(11, "block4_conv1", 7, 512),
    conv(12, "block4_conv2", 8, 512),
    conv(13, "block4_conv3", 9, 512),
    pool(14, "block4_pool"),
    conv(15, "block5_conv1", 10, 512),
    conv(16, "block5_conv2", 11, 512),
    conv(17, "block5_conv3", 12, 512),
    pool(18, "block5_pool"),
];

pub const CONV_COUNT: usize = 13;
pub const KERNEL_SIZE: usize = 3;

pub fn conv_names() -> impl Iterator<Item = &'static str> {
    VGG16_LAYERS.iter().filter_map(|l| match l.kind {
        LayerKind::Conv { .. } => Some(l.name),
        LayerKind::Pool => None,
    })
}

/// Standard VGG16 output widths, in convolution order.
pub fn vgg16_widths() -> [usize; CONV_COUNT] {
    let mut out = [0; CONV_COUNT];
    for l in VGG16_LAYERS.iter() {
        if let LayerKind::Conv { index, out_channels } = l.kind {
            out[index] = out_channels;
        }
    }
    out
}

/// Number of pooling stages completed before layer `id`.
pub fn pools_before(id: u8) -> u32 {
    VGG16_LAYERS
        .iter()
        .filter(|l| l.id < id && l.kind == LayerKind::Pool)
        .count() as u32
}

/// Image pixels per grid pixel at the *input* of layer `id`.
pub fn input_stride(id: u8) -> usize {
    1 << pools_before(id)
}

/// Spatial dims of layer `id`'s output for an `h x w` image.
pub fn layer_dims(id: u8, h: usize, w: usize) -> (usize, usize) {
    let mut dims = (h, w);
    for l in VGG16_LAYERS.iter().take_while(|l| l.id <= id) {
        if l.kind == LayerKind::Pool {
            dims = (dims.0.div_ceil(2), dims.1.div_ceil(2));
        }
    }
    dims
}
