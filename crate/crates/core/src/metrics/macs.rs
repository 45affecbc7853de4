//! Multiply-accumulate accounting.
//!
//! Forward passes tally the multiplies they actually execute into a
//! [`MacCounter`]; [`pde_layer_macs`] is the matching closed form for one PDE
//! layer. Per-channel scalars (`B_x`, `B_y`, `L`, `1/L`, `2δt`) are hoisted out
//! of the pixel loop and are not counted, so every term below scales with the
//! number of pixels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pde::VelocityMode;
use crate::tensor::Shape;

/// Multiplies per pixel per iteration shared by both velocity modes:
/// the two diffusion products, the two advection products, `2δt·f` and the
/// final scaling by `1/L`.
pub const PDE_STENCIL_MACS: u64 = 6;

/// Extra multiplies per pixel per iteration when velocities vary per pixel:
/// forming `A_x`, `A_y`, the central differences `u_x`, `v_y`, the product
/// `2δt·(u_x + v_y)` and its application to `H^k`.
pub const PDE_SPATIAL_EXTRA_MACS: u64 = 6;

/// One multiply per element to form the affine source term.
pub const PDE_SOURCE_MACS: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacCategory {
    Conv,
    Pde,
    Other,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCounter {
    conv: u64,
    pde: u64,
    other: u64,
}

impl MacCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, category: MacCategory, macs: u64) {
        match category {
            MacCategory::Conv => self.conv += macs,
            MacCategory::Pde => self.pde += macs,
            MacCategory::Other => self.other += macs,
        }
    }

    pub fn merge(&mut self, other: &MacCounter) {
        self.conv += other.conv;
        self.pde += other.pde;
        self.other += other.other;
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn conv(&self) -> u64 {
        self.conv
    }

    pub fn pde(&self) -> u64 {
        self.pde
    }

    pub fn other(&self) -> u64 {
        self.other
    }

    pub fn total(&self) -> u64 {
        self.conv + self.pde + self.other
    }

    /// Fraction of the total spent in PDE layers, 0 when nothing was counted.
    pub fn pde_share(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.pde as f64 / t as f64,
        }
    }
}

impl fmt::Display for MacCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "total {} GMACs (conv {}, pde {}, other {}; pde share {:.2}%)",
            format_gmacs(self.total()),
            format_gmacs(self.conv),
            format_gmacs(self.pde),
            format_gmacs(self.other),
            100.0 * self.pde_share()
        )
    }
}

/// GMACs with three decimals.
pub fn format_gmacs(macs: u64) -> String {
    format!("{:.3}", macs as f64 / 1e9)
}

pub fn pde_per_pixel_macs(mode: VelocityMode) -> u64 {
    match mode {
        VelocityMode::Uniform => PDE_STENCIL_MACS,
        VelocityMode::Spatial => PDE_STENCIL_MACS + PDE_SPATIAL_EXTRA_MACS,
    }
}

/// Closed-form forward cost of one PDE layer with `k` iterations.
pub fn pde_layer_macs(shape: Shape, k: usize, mode: VelocityMode) -> u64 {
    let elements = shape.len() as u64;
    elements * PDE_SOURCE_MACS + elements * k as u64 * pde_per_pixel_macs(mode)
}

pub fn conv3x3_macs(shape_in: Shape, out_channels: usize) -> u64 {
    (shape_in.len() * out_channels * 9) as u64
}
