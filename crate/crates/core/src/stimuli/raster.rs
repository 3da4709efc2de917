use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::Tensor;

/// 8-bit grayscale raster. Used both for item patches and whole displays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    height: usize,
    width: usize,
    px: Vec<u8>,
}

impl Patch {
    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Patch {
            height,
            width,
            px: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut px = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                px.push(f(y, x));
            }
        }
        Patch { height, width, px }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.px
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.px[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.px[y * self.width + x] = v;
    }

    /// Quarter turn clockwise.
    pub fn rot90cw(&self) -> Patch {
        let (h, w) = (self.height, self.width);
        Patch::from_fn(w, h, |y, x| self.get(h - 1 - x, y))
    }

    /// `quarters` clockwise quarter turns.
    pub fn rotated(&self, quarters: u32) -> Patch {
        let mut p = self.clone();
        for _ in 0..quarters % 4 {
            p = p.rot90cw();
        }
        p
    }

    /// Copies `src` with its top-left corner at `(top, left)`; must fit.
    pub fn paste(&mut self, src: &Patch, top: usize, left: usize) {
        assert!(top + src.height <= self.height && left + src.width <= self.width);
        for y in 0..src.height {
            let dst = (top + y) * self.width + left;
            self.px[dst..dst + src.width].copy_from_slice(&src.px[y * src.width..(y + 1) * src.width]);
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(1, self.height, self.width, self.px.iter().map(|&v| v as f32).collect()).expect("patch dims")
    }
}

/// Pixel centre relative to the centre of an `n x n` square, in (x, y) with y
/// pointing down, after undoing a clockwise rotation by `deg`.
fn local(y: usize, x: usize, n: usize, deg: f64) -> (f64, f64) {
    let c = n as f64 / 2.0;
    let (px, py) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
    let (s, co) = math::sin_cos(deg.to_radians());
    // Rotating the shape clockwise by deg (screen coordinates) is the same as
    // rotating sample points counter-clockwise.
    (px * co + py * s, -px * s + py * co)
}

/// Bar of `length x width` px centred in an `n`-px square; 0 deg is vertical
/// and positive angles tilt clockwise.
pub fn bar(n: usize, length: f64, width: f64, deg: f64, fg: u8, bg: u8) -> Patch {
    Patch::from_fn(n, n, |y, x| {
        let (u, v) = local(y, x, n, deg);
        let inside = -width / 2.0 <= u && u < width / 2.0 && -length / 2.0 <= v && v < length / 2.0;
        if inside {
            fg
        } else {
            bg
        }
    })
}

/// Circular arc of radius `radius` spanning chord `chord`, stroked with a
/// disc of diameter `stroke`, centred in an `n`-px square. At 0 deg the chord
/// is vertical and the arc bulges left.
pub fn arc(n: usize, radius: f64, chord: f64, stroke: f64, deg: f64, fg: u8, bg: u8) -> Patch {
    let half = libm::asin(chord / 2.0 / radius);
    // Circle centre placed so the arc's extent is centred on the square.
    let cx = radius * (1.0 + libm::cos(half)) / 2.0;
    let (e_sin, e_cos) = math::sin_cos(half);
    let ends = [
        (cx - radius * e_cos, -radius * e_sin),
        (cx - radius * e_cos, radius * e_sin),
    ];
    let r2 = stroke / 2.0;
    Patch::from_fn(n, n, |y, x| {
        let (u, v) = local(y, x, n, deg);
        let (dx, dy) = (u - cx, v);
        // Angle measured from the leftward direction.
        let ang = libm::atan2(dy, -dx).abs();
        let dist = if ang <= half {
            (math::sqrt(dx * dx + dy * dy) - radius).abs()
        } else {
            ends.iter()
                .map(|(ex, ey)| math::sqrt((u - ex) * (u - ex) + (v - ey) * (v - ey)))
                .fold(f64::INFINITY, f64::min)
        };
        if dist <= r2 {
            fg
        } else {
            bg
        }
    })
}

/// Disc of diameter `n` filled with a 16-step ramp that brightens from left to
/// right, on `bg`.
pub fn ramp_disc(n: usize, levels: u32, step: u8, bg: u8) -> Patch {
    let r = n as f64 / 2.0;
    Patch::from_fn(n, n, |y, x| {
        let (dx, dy) = (x as f64 + 0.5 - r, y as f64 + 0.5 - r);
        if dx * dx + dy * dy <= r * r {
            let level = ((x as f64 + 0.5) / n as f64 * levels as f64) as u32;
            (level.min(levels - 1) * step as u32) as u8
        } else {
            bg
        }
    })
}

/// The four arms of a centred plus sign of stroke `stroke` in an `n`-px
/// square. Each arm runs from its edge through the central stroke square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Up,
    Down,
    Left,
    Right,
}

/// Union of `arms`, each optionally shifted vertically by `dy` px (negative is
/// up).
pub fn arms(n: usize, stroke: usize, arms: &[(Arm, isize)], fg: u8, bg: u8) -> Patch {
    let lo = (n - stroke) / 2;
    let hi = lo + stroke;
    let mut p = Patch::filled(n, n, bg);
    for &(arm, dy) in arms {
        let (rows, cols) = match arm {
            Arm::Up => ((0, hi), (lo, hi)),
            Arm::Down => ((lo, n), (lo, hi)),
            Arm::Left => ((lo, hi), (0, hi)),
            Arm::Right => ((lo, hi), (lo, n)),
        };
        for y in rows.0..rows.1 {
            let yy = y as isize + dy;
            if yy < 0 || yy >= n as isize {
                continue;
            }
            for x in cols.0..cols.1 {
                p.set(yy as usize, x, fg);
            }
        }
    }
    p
}

/// Number of square edges (top, right, bottom, left) carrying any pixel
/// other than `bg`.
pub fn edge_contacts(p: &Patch, bg: u8) -> usize {
    let (h, w) = (p.height(), p.width());
    let top = (0..w).any(|x| p.get(0, x) != bg);
    let bottom = (0..w).any(|x| p.get(h - 1, x) != bg);
    let left = (0..h).any(|y| p.get(y, 0) != bg);
    let right = (0..h).any(|y| p.get(y, w - 1) != bg);
    [top, right, bottom, left].iter().filter(|&&b| b).count()
}
