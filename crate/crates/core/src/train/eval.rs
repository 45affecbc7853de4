use std::path::Path;

use serde::Serialize;

use crate::blob;
use crate::data::{write_image, Dataset, Split};
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim, SsimMode};
use crate::net::Model;
use crate::pde::Discretization;
use crate::tensor::{FeatureMap, Real};

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EvalRow {
    pub index: usize,
    pub blurred_psnr: Real,
    pub restored_psnr: Real,
    pub blurred_ssim: Real,
    pub restored_ssim: Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split: Split,
    pub k: usize,
    pub delta_t: Real,
    pub ssim_mode: SsimMode,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    fn mean(&self, f: impl Fn(&EvalRow) -> Real) -> Real {
        self.rows.iter().map(f).sum::<Real>() / self.rows.len().max(1) as Real
    }

    pub fn mean_blurred_psnr(&self) -> Real {
        self.mean(|r| r.blurred_psnr)
    }

    pub fn mean_restored_psnr(&self) -> Real {
        self.mean(|r| r.restored_psnr)
    }

    pub fn mean_blurred_ssim(&self) -> Real {
        self.mean(|r| r.blurred_ssim)
    }

    pub fn mean_restored_ssim(&self) -> Real {
        self.mean(|r| r.restored_ssim)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        blob::write_atomic(path, &self.to_csv()?)
    }
}

/// Per-image PSNR/SSIM of the blurred input and the restoration. SSIM falls
/// back to 8x8 blocks for images smaller than the Gaussian window.
/// With `image_dir`, writes `NNNNN_{blurred,restored,sharp}.ppm` there.
pub fn evaluate(
    model: &Model,
    dataset: &Dataset,
    split: Split,
    disc: Discretization,
    image_dir: Option<&Path>,
) -> Result<EvalReport> {
    let samples = dataset.split(split);
    let (h, w) = (model.config.height, model.config.width);
    let ssim_mode = if h.min(w) >= SsimMode::Gaussian11.window() {
        SsimMode::Gaussian11
    } else {
        SsimMode::Block8
    };
    if let Some(dir) = image_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let restored: FeatureMap = model.predict(&s.blurred, disc)?;
        rows.push(EvalRow {
            index: s.index,
            blurred_psnr: psnr(&s.blurred, &s.sharp)?,
            restored_psnr: psnr(&restored, &s.sharp)?,
            blurred_ssim: ssim(&s.blurred, &s.sharp, ssim_mode)?,
            restored_ssim: ssim(&restored, &s.sharp, ssim_mode)?,
        });
        if let Some(dir) = image_dir {
            write_image(&dir.join(format!("{:05}_blurred.ppm", s.index)), &s.blurred)?;
            write_image(&dir.join(format!("{:05}_restored.ppm", s.index)), &restored)?;
            write_image(&dir.join(format!("{:05}_sharp.ppm", s.index)), &s.sharp)?;
        }
    }
    Ok(EvalReport {
        split,
        k: disc.k,
        delta_t: disc.delta_t,
        ssim_mode,
        rows,
    })
}
