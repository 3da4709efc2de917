use alloc::vec;

use crate::{Error, Filter, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so the output keeps the input's spatial dims. Odd totals
    /// put the extra row/column at the bottom/right.
    Same,
    Valid,
}

impl Padding {
    /// `(top, left)` padding and output `(height, width)`.
    fn geometry(self, h: usize, w: usize, kh: usize, kw: usize) -> ((usize, usize), (usize, usize)) {
        match self {
            Padding::Same => (((kh - 1) / 2, (kw - 1) / 2), (h, w)),
            Padding::Valid => ((0, 0), (h + 1 - kh, w + 1 - kw)),
        }
    }
}

// Upper bound on the im2col scratch buffer, in floats.
const COLS_BUDGET: usize = 1 << 22;

/// Stride-1 cross-correlation of `input` with every kernel in `filter`, plus
/// `bias[out_ch]`.
pub fn conv2d(input: &Tensor, filter: &Filter, bias: &[f32], padding: Padding) -> Result<Tensor> {
    let (c, h, w) = input.dims();
    let (kh, kw) = (filter.kh(), filter.kw());
    if filter.in_channels() != c {
        return Err(Error::shape(
            "conv2d",
            format_args!("kernel in_ch = {c}"),
            format_args!("kernel in_ch = {}", filter.in_channels()),
        ));
    }
    if bias.len() != filter.out_channels() {
        return Err(Error::shape(
            "conv2d",
            format_args!("bias of length {}", filter.out_channels()),
            format_args!("bias of length {}", bias.len()),
        ));
    }
    if kh == 0 || kw == 0 || (padding == Padding::Valid && (kh > h || kw > w)) {
        return Err(Error::shape(
            "conv2d",
            format_args!("kernel within {h}x{w} input"),
            format_args!("{kh}x{kw} kernel"),
        ));
    }

    let ((pad_t, pad_l), (oh, ow)) = padding.geometry(h, w, kh, kw);
    let oc = filter.out_channels();
    let mut out = Tensor::zeros(oc, oh, ow);
    for o in 0..oc {
        out.plane_mut(o).fill(bias[o]);
    }
    if oh == 0 || ow == 0 {
        return Ok(out);
    }

    let k = c * kh * kw;
    let band = (COLS_BUDGET / (k * ow)).clamp(1, oh);
    let mut cols = vec![0.0f32; k * band * ow];
    let plane = oh * ow;

    let mut y0 = 0;
    while y0 < oh {
        let rows = band.min(oh - y0);
        let n = rows * ow;
        // cols[(ci, ky, kx), (y, x)]
        for ci in 0..c {
            let src = input.plane(ci);
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = ((ci * kh + ky) * kw + kx) * n;
                    let dst = &mut cols[row..row + n];
                    for (yy, dst_row) in dst.chunks_exact_mut(ow).enumerate() {
                        let sy = (y0 + yy + ky) as isize - pad_t as isize;
                        if sy < 0 || sy >= h as isize {
                            dst_row.fill(0.0);
                            continue;
                        }
                        let src_row = &src[sy as usize * w..(sy as usize + 1) * w];
                        for (x, d) in dst_row.iter_mut().enumerate() {
                            let sx = (x + kx) as isize - pad_l as isize;
                            *d = if sx < 0 || sx >= w as isize {
                                0.0
                            } else {
                                src_row[sx as usize]
                            };
                        }
                    }
                }
            }
        }

        let c_off = y0 * ow;
        // SAFETY: a is oc x k (row stride k), b is k x n (row stride n), and c
        // addresses oc rows of n contiguous floats starting at c_off with row
        // stride `plane`; all lie inside their buffers.
        unsafe {
            matrixmultiply::sgemm(
                oc,
                k,
                n,
                1.0,
                filter.data().as_ptr(),
                k as isize,
                1,
                cols.as_ptr(),
                n as isize,
                1,
                1.0,
                out.data_mut().as_mut_ptr().add(c_off),
                plane as isize,
                1,
            );
        }
        y0 += rows;
    }
    Ok(out)
}
