use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::tensor::{BoundaryMode, FeatureMap, Real};

/// Linear motion blur: a line segment rasterised onto a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionKernel {
    /// Row-major `size x size` weights, centred.
    pub taps: Vec<Real>,
    pub size: usize,
    pub length: usize,
    pub angle: Real,
}

/// What gets stored in manifests; the taps are recomputed on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelDescriptor {
    pub length: usize,
    pub angle: Real,
}

impl KernelDescriptor {
    pub fn kernel(&self) -> MotionKernel {
        make_motion_kernel(self.length, self.angle)
    }
}

impl MotionKernel {
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn tap(&self, dx: isize, dy: isize) -> Real {
        let r = self.radius() as isize;
        self.taps[((dy + r) * self.size as isize + dx + r) as usize]
    }

    pub fn descriptor(&self) -> KernelDescriptor {
        KernelDescriptor {
            length: self.length,
            angle: self.angle,
        }
    }
}

/// `length` samples at unit spacing, centred on the origin and running
/// along `angle` (radians, counter-clockwise from +x with y pointing down the
/// rows). Each sample is bilinearly splatted; the result is normalised.
/// A `length` of zero is treated as one.
pub fn make_motion_kernel(length: usize, angle: Real) -> MotionKernel {
    let length = length.max(1);
    let half = (length - 1) as Real / 2.0;
    let radius = half.ceil() as usize;
    let size = 2 * radius + 1;
    let mut taps = vec![0.0 as Real; size * size];
    let (dir_x, dir_y) = (angle.cos(), -angle.sin());
    for i in 0..length {
        let t = i as Real - half;
        let px = t * dir_x + radius as Real;
        let py = t * dir_y + radius as Real;
        let (x0, y0) = (px.floor(), py.floor());
        let (fx, fy) = (px - x0, py - y0);
        for (ox, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (oy, wy) in [(0, 1.0 - fy), (1, fy)] {
                let w = wx * wy;
                if w == 0.0 {
                    continue;
                }
                let (x, y) = (x0 as isize + ox, y0 as isize + oy);
                if x < 0 || y < 0 || x >= size as isize || y >= size as isize {
                    // Only reachable through roundoff at the edge; the weight is negligible.
                    continue;
                }
                taps[y as usize * size + x as usize] += w;
            }
        }
    }
    let total: Real = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    MotionKernel {
        taps,
        size,
        length,
        angle,
    }
}

/// Per-channel correlation with `kernel`, additive Gaussian noise, clamp to
/// `[0, 1]`. With `noise_sigma == 0` the seed is unused.
pub fn blur(
    image: &FeatureMap,
    kernel: &MotionKernel,
    mode: BoundaryMode,
    noise_sigma: Real,
    seed: u64,
) -> FeatureMap {
    let s = image.shape();
    let (h, w) = (s.height, s.width);
    let r = kernel.radius() as isize;
    let mut out = FeatureMap::zeros(s);
    let nonzero: Vec<(isize, isize, Real)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (dx, dy, kernel.tap(dx, dy)))
        .filter(|&(_, _, t)| t != 0.0)
        .collect();
    for b in 0..s.batch {
        for c in 0..s.channels {
            let src = image.plane(b, c);
            let dst = out.plane_mut(b, c);
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for &(dx, dy, t) in &nonzero {
                        let sx = mode.resolve(x as isize + dx, w);
                        let sy = mode.resolve(y as isize + dy, h);
                        if let (Some(sx), Some(sy)) = (sx, sy) {
                            acc += t * src[sy * w + sx];
                        }
                    }
                    dst[y * w + x] = acc;
                }
            }
        }
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("positive sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in out.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out.clamp(0.0, 1.0)
}
