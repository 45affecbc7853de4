//! Restoration metrics, gradient-norm statistics and MAC accounting.

pub mod macs;
mod quality;

use serde::Serialize;

use crate::tensor::Real;

pub use macs::{pde_layer_macs, MacCategory, MacCounter};
pub use quality::{mean_psnr, mse, psnr, ssim, SsimMode, SSIM_C1, SSIM_C2};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradNormRecord {
    pub epoch: usize,
    pub step: usize,
    /// Global L2 norm over every parameter gradient.
    pub global: Real,
    pub per_module: Vec<(String, Real)>,
    /// False when any gradient entry is NaN or infinite.
    pub finite: bool,
}

/// L2 norms of named gradient groups and of their concatenation.
pub fn grad_norm<'a, I>(epoch: usize, step: usize, groups: I) -> GradNormRecord
where
    I: IntoIterator<Item = (String, &'a [Real])>,
{
    let mut total = 0.0;
    let mut finite = true;
    let mut per_module = Vec::new();
    for (name, g) in groups {
        let mut sq = 0.0;
        for &v in g {
            finite &= v.is_finite();
            sq += v * v;
        }
        total += sq;
        per_module.push((name, sq.sqrt()));
    }
    GradNormRecord {
        epoch,
        step,
        global: total.sqrt(),
        per_module,
        finite,
    }
}
