use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{xavier_bound, PdeLayerParams};
use crate::tensor::Real;

/// 3x3 convolution weights `(out, in, 3, 3)` and one bias per output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<Real>,
    pub bias: Vec<Real>,
}

impl ConvParams {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weight: vec![0.0; out_channels * in_channels * 9],
            bias: vec![0.0; out_channels],
        }
    }

    /// Xavier-uniform weights (`fan_in = 9·in`, `fan_out = 9·out`), zero bias.
    pub fn xavier(in_channels: usize, out_channels: usize, seed: u64) -> Self {
        let mut p = Self::zeros(in_channels, out_channels);
        let bound = xavier_bound(9 * in_channels, 9 * out_channels);
        let dist = Uniform::new_inclusive(-bound, bound).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut p.weight {
            *w = dist.sample(&mut rng);
        }
        p
    }

    pub fn num_scalars(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    pub fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> Real {
        self.weight[((o * self.in_channels + i) * 3 + ky) * 3 + kx]
    }
}

/// Every trainable parameter of a graph: convolutions and PDE layers.
///
/// Flat ordering: each convolution's weights then bias, in index order,
/// followed by each PDE layer in its own documented order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    pub convs: Vec<ConvParams>,
    pub pde: Vec<PdeLayerParams>,
}

impl ParamSet {
    pub fn zeros_like(&self) -> Self {
        Self {
            convs: self
                .convs
                .iter()
                .map(|c| ConvParams::zeros(c.in_channels, c.out_channels))
                .collect(),
            pde: self.pde.iter().map(|p| p.zeros_like()).collect(),
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.convs.iter().map(|c| c.num_scalars()).sum::<usize>()
            + self.pde.iter().map(|p| p.num_scalars()).sum::<usize>()
    }

    pub fn to_flat(&self) -> Vec<Real> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for c in &self.convs {
            out.extend_from_slice(&c.weight);
            out.extend_from_slice(&c.bias);
        }
        for p in &self.pde {
            out.extend(p.to_flat());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[Real]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Corrupt(format!(
                "parameter set expects {} scalars, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut off = 0;
        for c in &mut self.convs {
            let n = c.weight.len();
            c.weight.copy_from_slice(&flat[off..off + n]);
            off += n;
            let n = c.bias.len();
            c.bias.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        for p in &mut self.pde {
            let n = p.num_scalars();
            p.set_flat(&flat[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    /// `(name, length)` of each contiguous tensor in the flat ordering,
    /// e.g. `conv3.weight`, `pde1.u`.
    pub fn segments(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.weight"), c.weight.len()));
            out.push((format!("conv{i}.bias"), c.bias.len()));
        }
        for (i, p) in self.pde.iter().enumerate() {
            for (name, len) in p.segments() {
                out.push((format!("pde{i}.{name}"), len));
            }
        }
        out
    }

    /// `(module, length)` grouping used for per-module gradient norms:
    /// `conv<i>` and `pde<i>`.
    pub fn modules(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self
            .convs
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("conv{i}"), c.num_scalars()))
            .collect();
        out.extend(
            self.pde
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("pde{i}"), p.num_scalars())),
        );
        out
    }
}
