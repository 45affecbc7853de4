use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{blur, KernelDescriptor};
use super::pnm::{quantized, read_image, write_image};
use super::procedural::procedural_image;
use crate::blob;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{BoundaryMode, FeatureMap, Real, Shape};

pub const MANIFEST_FORMAT: &str = "pdeflow-dataset";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything that determines a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub height: usize,
    pub width: usize,
    pub length_min: usize,
    pub length_max: usize,
    pub noise_min: Real,
    pub noise_max: Real,
    pub boundary: BoundaryMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train: 512,
            val: 64,
            test: 64,
            height: 32,
            width: 32,
            length_min: 3,
            length_max: 9,
            noise_min: 0.0,
            noise_max: 0.01,
            boundary: BoundaryMode::Replicate,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if self.length_min == 0 || self.length_min > self.length_max {
            return Err(Error::Config(format!(
                "blur length range {}..={} is empty or starts at zero",
                self.length_min, self.length_max
            )));
        }
        if !(self.noise_min >= 0.0 && self.noise_min <= self.noise_max && self.noise_max.is_finite()) {
            return Err(Error::Config(format!(
                "noise range {}..={} is invalid",
                self.noise_min, self.noise_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// A sharp image and its degraded copy, both on the 8-bit grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub index: usize,
    pub sharp: FeatureMap,
    pub blurred: FeatureMap,
    pub kernel: KernelDescriptor,
    pub noise_sigma: Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SynthConfig,
    pub train: Vec<PairSample>,
    pub val: Vec<PairSample>,
    pub test: Vec<PairSample>,
}

fn degrade(index: usize, sharp: FeatureMap, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> PairSample {
    let length = rng.random_range(cfg.length_min..=cfg.length_max);
    let angle: Real = rng.random_range(0.0..std::f64::consts::PI as Real);
    let noise_sigma = if cfg.noise_max > cfg.noise_min {
        rng.random_range(cfg.noise_min..cfg.noise_max)
    } else {
        cfg.noise_min
    };
    let noise_seed: u64 = rng.random();
    let kernel = KernelDescriptor { length, angle };
    let sharp = quantized(&sharp);
    let blurred = quantized(&blur(&sharp, &kernel.kernel(), cfg.boundary, noise_sigma, noise_seed));
    PairSample {
        index,
        sharp,
        blurred,
        kernel,
        noise_sigma,
    }
}

/// Sample indices `0..total` assigned to train/val/test by a seeded shuffle.
pub fn split_indices(cfg: &SynthConfig) -> [Vec<usize>; 3] {
    let mut order: Vec<usize> = (0..cfg.total()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, u64::MAX)));
    let mut train = order[..cfg.train].to_vec();
    let mut val = order[cfg.train..cfg.train + cfg.val].to_vec();
    let mut test = order[cfg.train + cfg.val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    [train, val, test]
}

fn assemble(cfg: SynthConfig, mut samples: Vec<Option<PairSample>>) -> Dataset {
    let [train, val, test] = split_indices(&cfg);
    let mut take = |ids: Vec<usize>| -> Vec<PairSample> {
        ids.into_iter().map(|i| samples[i].take().expect("each index used once")).collect()
    };
    Dataset {
        train: take(train),
        val: take(val),
        test: take(test),
        config: cfg,
    }
}

/// Procedural dataset; a pure function of `cfg`.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let samples = (0..cfg.total())
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, i as u64));
            let sharp = procedural_image(cfg.height, cfg.width, &mut rng);
            Some(degrade(i, sharp, cfg, &mut rng))
        })
        .collect();
    Ok(assemble(cfg.clone(), samples))
}

/// Degrade user-supplied sharp images. The split counts in `cfg` must add up
/// to the number of images.
pub fn dataset_from_images(cfg: &SynthConfig, images: Vec<FeatureMap>) -> Result<Dataset> {
    cfg.validate()?;
    if images.len() != cfg.total() {
        return Err(Error::Config(format!(
            "{} images supplied, splits ask for {}",
            images.len(),
            cfg.total()
        )));
    }
    let samples = images
        .into_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, i as u64));
            Some(degrade(i, img, cfg, &mut rng))
        })
        .collect();
    Ok(assemble(cfg.clone(), samples))
}

/// Every `.pgm`/`.ppm` in `dir` (sorted by name), centre-cropped to
/// `height x width`. Grey images are replicated to three channels.
pub fn load_sharp_directory(dir: &Path, height: usize, width: usize) -> Result<Vec<FeatureMap>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let img = read_image(p)?;
            let s = img.shape();
            if s.height < height || s.width < width {
                return Err(Error::Config(format!(
                    "{} is {}x{}, smaller than {height}x{width}",
                    p.display(),
                    s.height,
                    s.width
                )));
            }
            let (oy, ox) = ((s.height - height) / 2, (s.width - width) / 2);
            let mut out = FeatureMap::zeros(Shape::new(1, 3, height, width));
            for c in 0..3 {
                let src = c.min(s.channels - 1);
                for y in 0..height {
                    for x in 0..width {
                        out.set(0, c, y, x, img.at(0, src, y + oy, x + ox));
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub split: Split,
    pub sharp: String,
    pub blurred: String,
    pub kernel: KernelDescriptor,
    pub noise_sigma: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: SynthConfig,
    pub pairs: Vec<ManifestEntry>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[PairSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn iter_all(&self) -> impl Iterator<Item = (Split, &PairSample)> {
        self.train
            .iter()
            .map(|s| (Split::Train, s))
            .chain(self.val.iter().map(|s| (Split::Val, s)))
            .chain(self.test.iter().map(|s| (Split::Test, s)))
    }

    /// `(blurred, sharp)` stacked along the batch axis, in `ids` order.
    pub fn batch(&self, split: Split, ids: &[usize]) -> Result<(FeatureMap, FeatureMap)> {
        let pool = self.split(split);
        let blurred: Vec<FeatureMap> = ids.iter().map(|&i| pool[i].blurred.clone()).collect();
        let sharp: Vec<FeatureMap> = ids.iter().map(|&i| pool[i].sharp.clone()).collect();
        Ok((FeatureMap::stack(&blurred)?, FeatureMap::stack(&sharp)?))
    }

    /// Whole split as one batch.
    pub fn full_batch(&self, split: Split) -> Result<(FeatureMap, FeatureMap)> {
        let ids: Vec<usize> = (0..self.split(split).len()).collect();
        self.batch(split, &ids)
    }

    pub fn manifest(&self) -> Manifest {
        let pairs = self
            .iter_all()
            .map(|(split, s)| ManifestEntry {
                index: s.index,
                split,
                sharp: format!("sharp/{:05}.ppm", s.index),
                blurred: format!("blurred/{:05}.ppm", s.index),
                kernel: s.kernel,
                noise_sigma: s.noise_sigma,
            })
            .collect();
        Manifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            config: self.config.clone(),
            pairs,
        }
    }

    /// `dir/sharp/*.ppm`, `dir/blurred/*.ppm` and `dir/manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        for sub in ["sharp", "blurred"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let manifest = self.manifest();
        let by_index: std::collections::HashMap<usize, &PairSample> =
            self.iter_all().map(|(_, s)| (s.index, s)).collect();
        for entry in &manifest.pairs {
            let s = by_index[&entry.index];
            write_image(&dir.join(&entry.sharp), &s.sharp)?;
            write_image(&dir.join(&entry.blurred), &s.blurred)?;
        }
        let json = serde_json::to_vec_pretty(&manifest)?;
        blob::write_atomic(&dir.join(MANIFEST_FILE), &json)?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Version {
                found: manifest.version,
                expected: MANIFEST_VERSION,
            });
        }
        let mut ds = Dataset {
            config: manifest.config,
            train: vec![],
            val: vec![],
            test: vec![],
        };
        for e in manifest.pairs {
            let sample = PairSample {
                index: e.index,
                sharp: read_image(&dir.join(&e.sharp))?,
                blurred: read_image(&dir.join(&e.blurred))?,
                kernel: e.kernel,
                noise_sigma: e.noise_sigma,
            };
            match e.split {
                Split::Train => ds.train.push(sample),
                Split::Val => ds.val.push(sample),
                Split::Test => ds.test.push(sample),
            }
        }
        Ok(ds)
    }
}
