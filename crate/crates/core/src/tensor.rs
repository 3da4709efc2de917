use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Rank-3 `f32` array in channel-major, row-major order.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::shape(
                "tensor",
                format_args!("{channels}x{height}x{width} = {expected} values"),
                format_args!("{} values", data.len()),
            ));
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum over channels into a single-channel map.
    pub fn sum_channels(&self) -> Tensor {
        let n = self.plane_len();
        let mut out = vec![0.0f32; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.plane(c)) {
                *o += *v;
            }
        }
        Tensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: out,
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn require_same_dims(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(
                op,
                format_args!("{:?}", self.dims()),
                format_args!("{:?}", other.dims()),
            ));
        }
        Ok(())
    }
}

/// Convolution kernel bank `[out_ch, in_ch, kh, kw]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    data: Vec<f32>,
}

impl Filter {
    pub fn from_vec(out_channels: usize, in_channels: usize, kh: usize, kw: usize, data: Vec<f32>) -> Result<Self> {
        let expected = out_channels * in_channels * kh * kw;
        if data.len() != expected {
            return Err(Error::shape(
                "filter",
                format_args!("{out_channels}x{in_channels}x{kh}x{kw} = {expected} values"),
                format_args!("{} values", data.len()),
            ));
        }
        Ok(Filter {
            out_channels,
            in_channels,
            kh,
            kw,
            data,
        })
    }

    /// Wraps a single `[c, h, w]` tensor as a one-output kernel.
    pub fn from_tensor(t: &Tensor) -> Self {
        Filter {
            out_channels: 1,
            in_channels: t.channels(),
            kh: t.height(),
            kw: t.width(),
            data: t.data().to_vec(),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, y: usize, x: usize) -> f32 {
        self.data[((o * self.in_channels + i) * self.kh + y) * self.kw + x]
    }
}
