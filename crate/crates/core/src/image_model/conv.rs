//! Convolution and pooling kernels on `(channels, height, width)` maps.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, ArrayView4, Axis};

use crate::{Error, Result};

fn out_len(len: usize, kernel: usize, stride: usize) -> usize {
    (len - kernel) / stride + 1
}

/// Patches as columns: row index `(c, ki, kj)`, column index `(oi, oj)`.
pub fn im2col(x: ArrayView3<f64>, kernel: (usize, usize), stride: usize) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let (kh, kw) = kernel;
    let (oh, ow) = (out_len(h, kh, stride), out_len(w, kw, stride));
    let mut cols = Array2::zeros((c * kh * kw, oh * ow));
    for ch in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let mut row = cols.row_mut((ch * kh + ki) * kw + kj);
                for oi in 0..oh {
                    for oj in 0..ow {
                        row[oi * ow + oj] = x[[ch, oi * stride + ki, oj * stride + kj]];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters columns back, summing overlaps.
pub fn col2im(
    cols: ArrayView2<f64>,
    shape: (usize, usize, usize),
    kernel: (usize, usize),
    stride: usize,
) -> Array3<f64> {
    let (c, h, w) = shape;
    let (kh, kw) = kernel;
    let (oh, ow) = (out_len(h, kh, stride), out_len(w, kw, stride));
    let mut x = Array3::zeros(shape);
    for ch in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = cols.row((ch * kh + ki) * kw + kj);
                for oi in 0..oh {
                    for oj in 0..ow {
                        x[[ch, oi * stride + ki, oj * stride + kj]] += row[oi * ow + oj];
                    }
                }
            }
        }
    }
    x
}

fn check_conv(
    x: (usize, usize, usize),
    w: (usize, usize, usize, usize),
    bias: usize,
    stride: usize,
) -> Result<()> {
    let (c, h, wd) = x;
    let (out, inp, kh, kw) = w;
    if inp != c || bias != out || stride == 0 || kh == 0 || kw == 0 || kh > h || kw > wd {
        return Err(Error::Shape(format!(
            "cannot convolve {c}x{h}x{wd} maps with {out}x{inp}x{kh}x{kw} weights, \
             {bias} biases and stride {stride}"
        )));
    }
    Ok(())
}

/// `y_n = Σ_m w_{n,m} ⋆ x_m + b_n` where `⋆` is valid cross-correlation.
///
/// `x` is `(maps_in, h, w)`, `weights` is `(maps_out, maps_in, kh, kw)`.
pub fn convolve(
    x: ArrayView3<f64>,
    weights: ArrayView4<f64>,
    bias: ArrayView1<f64>,
    stride: usize,
) -> Result<Array3<f64>> {
    check_conv(x.dim(), weights.dim(), bias.len(), stride)?;
    let (_, _, kh, kw) = weights.dim();
    let cols = im2col(x, (kh, kw), stride);
    Ok(convolve_cols(&cols, weights, bias, out_dims(x.dim(), (kh, kw), stride)))
}

pub(crate) fn out_dims(
    x: (usize, usize, usize),
    kernel: (usize, usize),
    stride: usize,
) -> (usize, usize) {
    (out_len(x.1, kernel.0, stride), out_len(x.2, kernel.1, stride))
}

pub(crate) fn flat_weights(weights: ArrayView4<f64>) -> Array2<f64> {
    let (out, inp, kh, kw) = weights.dim();
    weights
        .to_shape((out, inp * kh * kw))
        .expect("reshape weights")
        .into_owned()
}

pub(crate) fn convolve_cols(
    cols: &Array2<f64>,
    weights: ArrayView4<f64>,
    bias: ArrayView1<f64>,
    (oh, ow): (usize, usize),
) -> Array3<f64> {
    let out = weights.dim().0;
    let mut y = flat_weights(weights).dot(cols);
    y += &bias.insert_axis(Axis(1));
    y.into_shape_with_order((out, oh, ow)).expect("reshape output")
}

/// Zero padding on both sides of each spatial axis.
pub fn pad(x: ArrayView3<f64>, ph: usize, pw: usize) -> Array3<f64> {
    let (c, h, w) = x.dim();
    let mut out = Array3::zeros((c, h + 2 * ph, w + 2 * pw));
    out.slice_mut(s![.., ph..ph + h, pw..pw + w]).assign(&x);
    out
}

/// Max pooling; also returns, per output cell, the flat input index of the
/// (first) maximum.
pub fn max_pool(
    x: ArrayView3<f64>,
    kernel: (usize, usize),
    stride: usize,
) -> (Array3<f64>, Array1<usize>) {
    let (c, h, w) = x.dim();
    let (kh, kw) = kernel;
    let (oh, ow) = (out_len(h, kh, stride), out_len(w, kw, stride));
    let mut y = Array3::zeros((c, oh, ow));
    let mut arg = Array1::zeros(c * oh * ow);
    for ch in 0..c {
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0;
                for ki in 0..kh {
                    for kj in 0..kw {
                        let (i, j) = (oi * stride + ki, oj * stride + kj);
                        let v = x[[ch, i, j]];
                        if v > best {
                            best = v;
                            best_at = (ch * h + i) * w + j;
                        }
                    }
                }
                y[[ch, oi, oj]] = best;
                arg[(ch * oh + oi) * ow + oj] = best_at;
            }
        }
    }
    (y, arg)
}
