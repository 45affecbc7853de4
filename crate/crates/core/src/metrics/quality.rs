//! PSNR and SSIM on `[0, 1]` images (peak value 1.0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Real};

pub const SSIM_C1: Real = 0.01 * 0.01;
pub const SSIM_C2: Real = 0.03 * 0.03;

/// Mean squared error over all elements.
pub fn mse(a: &FeatureMap, b: &FeatureMap) -> Result<Real> {
    a.ensure_same_shape(b)?;
    let mut acc = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc / a.data().len().max(1) as Real)
}

/// `10·log10(1 / MSE)`. Identical inputs give `Real::INFINITY`.
pub fn psnr(a: &FeatureMap, b: &FeatureMap) -> Result<Real> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(Real::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

/// Per-sample PSNR, averaged over the batch axis.
pub fn mean_psnr(a: &FeatureMap, b: &FeatureMap) -> Result<Real> {
    a.ensure_same_shape(b)?;
    let n = a.shape().batch;
    let mut acc = 0.0;
    for i in 0..n {
        acc += psnr(&a.sample(i), &b.sample(i))?;
    }
    Ok(acc / n.max(1) as Real)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimMode {
    /// 11x11 Gaussian-weighted sliding window (σ = 1.5), valid positions only.
    #[default]
    Gaussian11,
    /// Non-overlapping 8x8 blocks; a trailing partial block is ignored.
    Block8,
}

impl SsimMode {
    pub fn window(self) -> usize {
        match self {
            SsimMode::Gaussian11 => 11,
            SsimMode::Block8 => 8,
        }
    }

    /// Label written next to every reported SSIM value.
    pub fn label(self) -> &'static str {
        match self {
            SsimMode::Gaussian11 => "gauss11_s1.5_c1=1e-4_c2=9e-4",
            SsimMode::Block8 => "block8_c1=1e-4_c2=9e-4",
        }
    }
}

fn gaussian_window(size: usize, sigma: Real) -> Vec<Real> {
    let r = (size / 2) as Real;
    let mut w = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as Real - r, y as Real - r);
            w.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: Real = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

#[inline]
fn ssim_from_moments(mu_a: Real, mu_b: Real, var_a: Real, var_b: Real, cov: Real) -> Real {
    let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    num / den
}

/// Weighted window statistics. `weights` is `None` for a uniform window.
fn window_ssim(
    a: &[Real],
    b: &[Real],
    width: usize,
    x0: usize,
    y0: usize,
    size: usize,
    weights: Option<&[Real]>,
) -> Real {
    let uniform = 1.0 / (size * size) as Real;
    let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in 0..size {
        for x in 0..size {
            let wgt = weights.map_or(uniform, |w| w[y * size + x]);
            let i = (y0 + y) * width + x0 + x;
            let (va, vb) = (a[i], b[i]);
            ma += wgt * va;
            mb += wgt * vb;
            saa += wgt * va * va;
            sbb += wgt * vb * vb;
            sab += wgt * va * vb;
        }
    }
    ssim_from_moments(ma, mb, saa - ma * ma, sbb - mb * mb, sab - ma * mb)
}

/// Mean SSIM over windows, channels and batch.
pub fn ssim(a: &FeatureMap, b: &FeatureMap, mode: SsimMode) -> Result<Real> {
    a.ensure_same_shape(b)?;
    let s = a.shape();
    let win = mode.window();
    if s.height < win || s.width < win {
        return Err(Error::Config(format!(
            "image {}x{} is smaller than the {win}x{win} SSIM window",
            s.height, s.width
        )));
    }
    let gauss = gaussian_window(11, 1.5);
    let mut acc = 0.0;
    let mut count = 0usize;
    for bi in 0..s.batch {
        for c in 0..s.channels {
            let (pa, pb) = (a.plane(bi, c), b.plane(bi, c));
            match mode {
                SsimMode::Gaussian11 => {
                    for y0 in 0..=s.height - win {
                        for x0 in 0..=s.width - win {
                            acc += window_ssim(pa, pb, s.width, x0, y0, win, Some(&gauss));
                            count += 1;
                        }
                    }
                }
                SsimMode::Block8 => {
                    for y0 in (0..=s.height - win).step_by(win) {
                        for x0 in (0..=s.width - win).step_by(win) {
                            acc += window_ssim(pa, pb, s.width, x0, y0, win, None);
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(acc / count as Real)
}
