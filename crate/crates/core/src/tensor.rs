//! Dense feature maps and 2-D fields.
//!
//! Everything is stored row-major in `(batch, channel, height, width)` order,
//! so the innermost loop of every stencil walks along the width axis. `x`
//! always indexes columns and `y` rows.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point type used by every numerical routine.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            batch,
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of elements in one `(batch, channel)` plane.
    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    pub const fn with_channels(self, channels: usize) -> Self {
        Self { channels, ..self }
    }

    pub const fn with_spatial(self, height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ..self
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

/// How stencil reads outside the field are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Clamp to the nearest edge sample.
    #[default]
    Replicate,
    /// Wrap around (torus).
    Periodic,
    /// Outside reads are zero.
    ZeroPad,
}

impl BoundaryMode {
    /// Map a possibly out-of-range coordinate onto `0..len`. `None` means the
    /// read lands outside the domain and contributes zero.
    #[inline]
    pub fn resolve(self, idx: isize, len: usize) -> Option<usize> {
        let n = len as isize;
        if (0..n).contains(&idx) {
            return Some(idx as usize);
        }
        match self {
            BoundaryMode::Replicate => Some(idx.clamp(0, n - 1) as usize),
            BoundaryMode::Periodic => Some(idx.rem_euclid(n) as usize),
            BoundaryMode::ZeroPad => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::Replicate => "replicate",
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::ZeroPad => "zero_pad",
        }
    }
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replicate" => Ok(BoundaryMode::Replicate),
            "periodic" => Ok(BoundaryMode::Periodic),
            "zero_pad" | "zeropad" | "zero" => Ok(BoundaryMode::ZeroPad),
            other => Err(Error::Config(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// Stencil read from a row-major `height x width` plane.
///
/// `(x, y)` must lie inside the plane and the offsets must be in `-1..=1`.
pub fn plane_neighbor(
    plane: &[Real],
    height: usize,
    width: usize,
    x: usize,
    y: usize,
    dx: isize,
    dy: isize,
    mode: BoundaryMode,
) -> Result<Real> {
    if x >= width || y >= height {
        return Err(Error::OutOfRange(format!(
            "base ({x}, {y}) outside {height}x{width} field"
        )));
    }
    if !(-1..=1).contains(&dx) || !(-1..=1).contains(&dy) {
        return Err(Error::OutOfRange(format!(
            "stencil offset ({dx}, {dy}) exceeds one cell"
        )));
    }
    let xi = mode.resolve(x as isize + dx, width);
    let yi = mode.resolve(y as isize + dy, height);
    Ok(match (xi, yi) {
        (Some(xi), Some(yi)) => plane[yi * width + xi],
        _ => 0.0,
    })
}

/// A single `height x width` field, e.g. one channel of a velocity component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField2D {
    height: usize,
    width: usize,
    data: Vec<Real>,
}

impl ScalarField2D {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: Real) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<Real>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::LengthMismatch {
                shape: Shape::new(1, 1, height, width),
                len: data.len(),
                expected: height * width,
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Real {
        self.data[y * self.width + x]
    }

    pub fn neighbor(&self, x: usize, y: usize, dx: isize, dy: isize, mode: BoundaryMode) -> Result<Real> {
        plane_neighbor(&self.data, self.height, self.width, x, y, dx, dy, mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
}

/// 4-D real tensor in `(batch, channel, height, width)` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    shape: Shape,
    data: Vec<Real>,
}

impl FeatureMap {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: Real) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<Real>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                shape,
                len: data.len(),
                expected: shape.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Real> {
        self.data
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let s = &self.shape;
        ((b * s.channels + c) * s.height + y) * s.width + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> Real {
        self.data[self.offset(b, c, y, x)]
    }

    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, value: Real) {
        let i = self.offset(b, c, y, x);
        self.data[i] = value;
    }

    pub fn plane(&self, b: usize, c: usize) -> &[Real] {
        let n = self.shape.plane();
        let start = (b * self.shape.channels + c) * n;
        &self.data[start..start + n]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [Real] {
        let n = self.shape.plane();
        let start = (b * self.shape.channels + c) * n;
        &mut self.data[start..start + n]
    }

    /// Copy out sample `b` as a batch-of-one map.
    pub fn sample(&self, b: usize) -> FeatureMap {
        let n = self.shape.channels * self.shape.plane();
        FeatureMap {
            shape: Shape { batch: 1, ..self.shape },
            data: self.data[b * n..(b + 1) * n].to_vec(),
        }
    }

    /// Stack batch-of-one (or larger) maps along the batch axis.
    pub fn stack(items: &[FeatureMap]) -> Result<FeatureMap> {
        let first = items
            .first()
            .ok_or_else(|| Error::Config("cannot stack an empty list".into()))?;
        let per = first.shape.with_channels(first.shape.channels);
        let mut data = Vec::new();
        let mut batch = 0;
        for item in items {
            if item.shape.channels != per.channels
                || item.shape.height != per.height
                || item.shape.width != per.width
            {
                return Err(Error::ShapeMismatch {
                    expected: per,
                    actual: item.shape,
                });
            }
            batch += item.shape.batch;
            data.extend_from_slice(&item.data);
        }
        Ok(FeatureMap {
            shape: Shape { batch, ..per },
            data,
        })
    }

    pub fn neighbor(
        &self,
        b: usize,
        c: usize,
        x: usize,
        y: usize,
        dx: isize,
        dy: isize,
        mode: BoundaryMode,
    ) -> Result<Real> {
        if b >= self.shape.batch || c >= self.shape.channels {
            return Err(Error::OutOfRange(format!(
                "plane ({b}, {c}) outside shape {}",
                self.shape
            )));
        }
        plane_neighbor(
            self.plane(b, c),
            self.shape.height,
            self.shape.width,
            x,
            y,
            dx,
            dy,
            mode,
        )
    }

    pub fn elementwise(&self, other: &FeatureMap, op: ElementwiseOp) -> Result<FeatureMap> {
        self.ensure_same_shape(other)?;
        let f: fn(Real, Real) -> Real = match op {
            ElementwiseOp::Add => |a, b| a + b,
            ElementwiseOp::Sub => |a, b| a - b,
            ElementwiseOp::Mul => |a, b| a * b,
        };
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(FeatureMap {
            shape: self.shape,
            data,
        })
    }

    pub fn add(&self, other: &FeatureMap) -> Result<FeatureMap> {
        self.elementwise(other, ElementwiseOp::Add)
    }

    pub fn sub(&self, other: &FeatureMap) -> Result<FeatureMap> {
        self.elementwise(other, ElementwiseOp::Sub)
    }

    pub fn mul(&self, other: &FeatureMap) -> Result<FeatureMap> {
        self.elementwise(other, ElementwiseOp::Mul)
    }

    /// `self += other`, in place.
    pub fn accumulate(&mut self, other: &FeatureMap) -> Result<()> {
        self.ensure_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scaled(&self, factor: Real) -> FeatureMap {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(Real) -> Real) -> FeatureMap {
        FeatureMap {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sequential row-major sum; the fixed order makes it reproducible.
    pub fn reduce_sum(&self) -> Real {
        let mut acc = 0.0;
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    pub fn reduce_max_abs(&self) -> Real {
        self.data.iter().fold(0.0, |m: Real, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> Real {
        if self.data.is_empty() {
            0.0
        } else {
            self.reduce_sum() / self.data.len() as Real
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn clamp(&self, lo: Real, hi: Real) -> FeatureMap {
        self.map(|v| v.clamp(lo, hi))
    }

    pub(crate) fn ensure_same_shape(&self, other: &FeatureMap) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                actual: other.shape,
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}
