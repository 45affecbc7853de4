//! Primitive kernels and their adjoints.

use super::params::ConvParams;
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Real, Shape};

/// Column map for a 3x3 tap `kx` under replicate padding: `clamp(x + kx - 1)`.
#[inline]
fn clamp_index(i: usize, k: usize, len: usize) -> usize {
    (i + k).saturating_sub(1).min(len - 1)
}

/// `acc[x] += w * src[clamp(x + kx - 1)]` for one row.
#[inline]
fn axpy_shifted(acc: &mut [Real], src: &[Real], w: Real, kx: usize) {
    let n = acc.len();
    match kx {
        1 => {
            for (a, s) in acc.iter_mut().zip(src) {
                *a += w * s;
            }
        }
        0 => {
            acc[0] += w * src[0];
            for (a, s) in acc[1..].iter_mut().zip(&src[..n - 1]) {
                *a += w * s;
            }
        }
        _ => {
            for (a, s) in acc[..n - 1].iter_mut().zip(&src[1..]) {
                *a += w * s;
            }
            acc[n - 1] += w * src[n - 1];
        }
    }
}

/// Transpose of [`axpy_shifted`]: `dst[clamp(x + kx - 1)] += w * g[x]`.
#[inline]
fn axpy_shifted_t(dst: &mut [Real], g: &[Real], w: Real, kx: usize) {
    let n = g.len();
    match kx {
        1 => {
            for (d, s) in dst.iter_mut().zip(g) {
                *d += w * s;
            }
        }
        0 => {
            dst[0] += w * g[0];
            for (d, s) in dst[..n - 1].iter_mut().zip(&g[1..]) {
                *d += w * s;
            }
        }
        _ => {
            for (d, s) in dst[1..].iter_mut().zip(&g[..n - 1]) {
                *d += w * s;
            }
            dst[n - 1] += w * g[n - 1];
        }
    }
}

/// `Σ_x g[x] * src[clamp(x + kx - 1)]`.
#[inline]
fn dot_shifted(g: &[Real], src: &[Real], kx: usize) -> Real {
    let n = g.len();
    let mut acc = 0.0;
    match kx {
        1 => {
            for (a, s) in g.iter().zip(src) {
                acc += a * s;
            }
        }
        0 => {
            acc += g[0] * src[0];
            for (a, s) in g[1..].iter().zip(&src[..n - 1]) {
                acc += a * s;
            }
        }
        _ => {
            for (a, s) in g[..n - 1].iter().zip(&src[1..]) {
                acc += a * s;
            }
            acc += g[n - 1] * src[n - 1];
        }
    }
    acc
}

/// 3x3 convolution, stride 1, replicate padding. Returns the output and the
/// number of multiplies executed.
pub fn conv2d(x: &FeatureMap, conv: &ConvParams) -> Result<(FeatureMap, u64)> {
    let s = x.shape();
    if s.channels != conv.in_channels {
        return Err(Error::ShapeMismatch {
            expected: s.with_channels(conv.in_channels),
            actual: s,
        });
    }
    let (h, w) = (s.height, s.width);
    let mut out = FeatureMap::zeros(s.with_channels(conv.out_channels));
    let mut macs = 0u64;
    for b in 0..s.batch {
        for o in 0..conv.out_channels {
            let bias = conv.bias[o];
            let dst = out.plane_mut(b, o);
            dst.fill(bias);
            for i in 0..conv.in_channels {
                let src = x.plane(b, i);
                for ky in 0..3 {
                    for y in 0..h {
                        let sy = clamp_index(y, ky, h);
                        let row_in = &src[sy * w..(sy + 1) * w];
                        let row_out = &mut dst[y * w..(y + 1) * w];
                        for kx in 0..3 {
                            axpy_shifted(row_out, row_in, conv.w(o, i, ky, kx), kx);
                            macs += w as u64;
                        }
                    }
                }
            }
        }
    }
    Ok((out, macs))
}

pub fn conv2d_backward(
    x: &FeatureMap,
    conv: &ConvParams,
    grad_out: &FeatureMap,
) -> (FeatureMap, ConvParams) {
    let s = x.shape();
    let (h, w) = (s.height, s.width);
    let mut gx = FeatureMap::zeros(s);
    let mut gc = ConvParams::zeros(conv.in_channels, conv.out_channels);
    for b in 0..s.batch {
        for o in 0..conv.out_channels {
            let g = grad_out.plane(b, o);
            gc.bias[o] += g.iter().sum::<Real>();
            for i in 0..conv.in_channels {
                let src = x.plane(b, i);
                for ky in 0..3 {
                    for y in 0..h {
                        let sy = clamp_index(y, ky, h);
                        let g_row = &g[y * w..(y + 1) * w];
                        let in_row = &src[sy * w..(sy + 1) * w];
                        for kx in 0..3 {
                            let idx = ((o * conv.in_channels + i) * 3 + ky) * 3 + kx;
                            gc.weight[idx] += dot_shifted(g_row, in_row, kx);
                        }
                    }
                }
                let dst = gx.plane_mut(b, i);
                for ky in 0..3 {
                    for y in 0..h {
                        let sy = clamp_index(y, ky, h);
                        let g_row = &g[y * w..(y + 1) * w];
                        let dst_row = &mut dst[sy * w..(sy + 1) * w];
                        for kx in 0..3 {
                            axpy_shifted_t(dst_row, g_row, conv.w(o, i, ky, kx), kx);
                        }
                    }
                }
            }
        }
    }
    (gx, gc)
}

pub fn relu(x: &FeatureMap) -> FeatureMap {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient passes where the forward input was strictly positive.
pub fn relu_backward(x: &FeatureMap, grad_out: &FeatureMap) -> FeatureMap {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    FeatureMap::from_vec(x.shape(), data).expect("same shape")
}

/// 2x2 average pooling.
pub fn downsample2x(x: &FeatureMap) -> Result<(FeatureMap, u64)> {
    let s = x.shape();
    if !s.height.is_multiple_of(2) || !s.width.is_multiple_of(2) {
        return Err(Error::Indivisible {
            size: if !s.height.is_multiple_of(2) { s.height } else { s.width },
            depth: 1,
            factor: 2,
        });
    }
    let (oh, ow) = (s.height / 2, s.width / 2);
    let mut out = FeatureMap::zeros(s.with_spatial(oh, ow));
    for b in 0..s.batch {
        for c in 0..s.channels {
            let src = x.plane(b, c);
            let dst = out.plane_mut(b, c);
            for y in 0..oh {
                for xx in 0..ow {
                    let i = 2 * y * s.width + 2 * xx;
                    dst[y * ow + xx] =
                        0.25 * (src[i] + src[i + 1] + src[i + s.width] + src[i + s.width + 1]);
                }
            }
        }
    }
    Ok((out, s.len() as u64))
}

pub fn downsample2x_backward(input_shape: Shape, grad_out: &FeatureMap) -> FeatureMap {
    let mut gx = FeatureMap::zeros(input_shape);
    let ow = input_shape.width / 2;
    for b in 0..input_shape.batch {
        for c in 0..input_shape.channels {
            let g = grad_out.plane(b, c);
            let dst = gx.plane_mut(b, c);
            for y in 0..input_shape.height {
                for x in 0..input_shape.width {
                    dst[y * input_shape.width + x] = 0.25 * g[(y / 2) * ow + x / 2];
                }
            }
        }
    }
    gx
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2x(x: &FeatureMap) -> FeatureMap {
    let s = x.shape();
    let (oh, ow) = (s.height * 2, s.width * 2);
    let mut out = FeatureMap::zeros(s.with_spatial(oh, ow));
    for b in 0..s.batch {
        for c in 0..s.channels {
            let src = x.plane(b, c);
            let dst = out.plane_mut(b, c);
            for y in 0..oh {
                for xx in 0..ow {
                    dst[y * ow + xx] = src[(y / 2) * s.width + xx / 2];
                }
            }
        }
    }
    out
}

pub fn upsample2x_backward(input_shape: Shape, grad_out: &FeatureMap) -> FeatureMap {
    let mut gx = FeatureMap::zeros(input_shape);
    let ow = input_shape.width * 2;
    for b in 0..input_shape.batch {
        for c in 0..input_shape.channels {
            let g = grad_out.plane(b, c);
            let dst = gx.plane_mut(b, c);
            for y in 0..input_shape.height * 2 {
                for x in 0..ow {
                    dst[(y / 2) * input_shape.width + x / 2] += g[y * ow + x];
                }
            }
        }
    }
    gx
}

/// Concatenate along the channel axis, in argument order.
pub fn concat_channels(parts: &[&FeatureMap]) -> Result<FeatureMap> {
    let first = parts[0].shape();
    let mut channels = 0;
    for p in parts {
        let s = p.shape();
        if s.batch != first.batch || s.height != first.height || s.width != first.width {
            return Err(Error::ShapeMismatch {
                expected: s.with_channels(first.channels).with_spatial(first.height, first.width),
                actual: s,
            });
        }
        channels += s.channels;
    }
    let out_shape = first.with_channels(channels);
    let mut out = FeatureMap::zeros(out_shape);
    for b in 0..first.batch {
        let mut c0 = 0;
        for p in parts {
            for c in 0..p.shape().channels {
                out.plane_mut(b, c0 + c).copy_from_slice(p.plane(b, c));
            }
            c0 += p.shape().channels;
        }
    }
    Ok(out)
}

pub fn concat_channels_backward(shapes: &[Shape], grad_out: &FeatureMap) -> Vec<FeatureMap> {
    let mut c0 = 0;
    shapes
        .iter()
        .map(|&s| {
            let mut g = FeatureMap::zeros(s);
            for b in 0..s.batch {
                for c in 0..s.channels {
                    g.plane_mut(b, c).copy_from_slice(grad_out.plane(b, c0 + c));
                }
            }
            c0 += s.channels;
            g
        })
        .collect()
}
