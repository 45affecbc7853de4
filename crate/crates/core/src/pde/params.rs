use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, ScalarField2D};

/// Raw diffusion value whose softplus is exactly `0.0` in floating point.
///
/// `exp(-1000)` underflows to zero, so both the effective coefficient and its
/// derivative vanish while the parameter itself stays finite.
pub const ZERO_DIFFUSION_RAW: Real = -1000.0;

/// Scale applied to the Xavier-uniform draw when initialising a layer.
pub const INIT_SCALE: Real = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityMode {
    /// One `(u, v)` pair per channel; the velocity divergence is zero.
    Uniform,
    /// Full per-pixel, per-channel velocity fields.
    #[default]
    Spatial,
}

impl VelocityMode {
    pub fn name(self) -> &'static str {
        match self {
            VelocityMode::Uniform => "uniform",
            VelocityMode::Spatial => "spatial",
        }
    }
}

impl std::str::FromStr for VelocityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(VelocityMode::Uniform),
            "spatial" => Ok(VelocityMode::Spatial),
            other => Err(Error::Config(format!("unknown velocity mode `{other}`"))),
        }
    }
}

/// `softplus(x) = ln(1 + e^x)`, evaluated without overflow.
#[inline]
pub fn softplus(x: Real) -> Real {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw value whose softplus is `d`. Zero maps to [`ZERO_DIFFUSION_RAW`].
pub fn softplus_inverse(d: Real) -> Real {
    assert!(d >= 0.0, "diffusion must be non-negative");
    if d == 0.0 {
        ZERO_DIFFUSION_RAW
    } else if d > 30.0 {
        d + (-(-d).exp()).ln_1p()
    } else {
        d.exp_m1().ln()
    }
}

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> Real {
    (6.0 / (fan_in + fan_out) as Real).sqrt()
}

/// Learned state of one advection-diffusion layer.
///
/// Velocities are stored per channel, either as `1x1` fields (uniform mode)
/// or as full `height x width` fields. Diffusion is per channel and kept
/// non-negative through `D = softplus(raw)`. The source term is the per-channel
/// affine map `f(I) = scale * I + bias`.
///
/// The same type doubles as the container for parameter gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeLayerParams {
    pub velocity_mode: VelocityMode,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub u: Vec<ScalarField2D>,
    pub v: Vec<ScalarField2D>,
    pub dx_raw: Vec<Real>,
    pub dy_raw: Vec<Real>,
    pub source_scale: Vec<Real>,
    pub source_bias: Vec<Real>,
}

impl PdeLayerParams {
    fn field_dims(mode: VelocityMode, height: usize, width: usize) -> (usize, usize) {
        match mode {
            VelocityMode::Uniform => (1, 1),
            VelocityMode::Spatial => (height, width),
        }
    }

    fn filled(
        channels: usize,
        height: usize,
        width: usize,
        mode: VelocityMode,
        raw: Real,
    ) -> Self {
        let (fh, fw) = Self::field_dims(mode, height, width);
        Self {
            velocity_mode: mode,
            channels,
            height,
            width,
            u: vec![ScalarField2D::zeros(fh, fw); channels],
            v: vec![ScalarField2D::zeros(fh, fw); channels],
            dx_raw: vec![raw; channels],
            dy_raw: vec![raw; channels],
            source_scale: vec![0.0; channels],
            source_bias: vec![0.0; channels],
        }
    }

    /// A layer whose every effective coefficient is zero: no velocity, no
    /// diffusion, no source. Its forward pass is the identity.
    pub fn zeros(channels: usize, height: usize, width: usize, mode: VelocityMode) -> Self {
        Self::filled(channels, height, width, mode, ZERO_DIFFUSION_RAW)
    }

    /// All-zero container shaped like `self`, used to accumulate gradients.
    pub fn zeros_like(&self) -> Self {
        Self::filled(self.channels, self.height, self.width, self.velocity_mode, 0.0)
    }

    /// Xavier-uniform draw scaled by [`INIT_SCALE`] for velocities, raw
    /// diffusion and source scale; source bias starts at zero.
    ///
    /// Fan sizes treat each parameter as a `(1, C, h, w)` tensor:
    /// `fan_in = C*h*w`, `fan_out = h*w` (per-channel scalars use `h = w = 1`).
    pub fn init(
        channels: usize,
        height: usize,
        width: usize,
        mode: VelocityMode,
        seed: u64,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Config(format!(
                "PDE layer dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::filled(channels, height, width, mode, 0.0);
        let (fh, fw) = Self::field_dims(mode, height, width);
        let field_bound = INIT_SCALE * xavier_bound(channels * fh * fw, fh * fw);
        let scalar_bound = INIT_SCALE * xavier_bound(channels, 1);
        let field_dist = Uniform::new_inclusive(-field_bound, field_bound).unwrap();
        let scalar_dist = Uniform::new_inclusive(-scalar_bound, scalar_bound).unwrap();

        for f in p.u.iter_mut().chain(p.v.iter_mut()) {
            for x in f.data_mut() {
                *x = field_dist.sample(&mut rng);
            }
        }
        for x in p
            .dx_raw
            .iter_mut()
            .chain(p.dy_raw.iter_mut())
            .chain(p.source_scale.iter_mut())
        {
            *x = scalar_dist.sample(&mut rng);
        }
        Ok(p)
    }

    /// Bound used by [`init`](Self::init) for the velocity entries.
    pub fn velocity_init_bound(&self) -> Real {
        let (fh, fw) = Self::field_dims(self.velocity_mode, self.height, self.width);
        INIT_SCALE * xavier_bound(self.channels * fh * fw, fh * fw)
    }

    pub fn diffusion_x(&self, c: usize) -> Real {
        softplus(self.dx_raw[c])
    }

    pub fn diffusion_y(&self, c: usize) -> Real {
        softplus(self.dy_raw[c])
    }

    pub fn set_diffusion(&mut self, c: usize, dx: Real, dy: Real) {
        self.dx_raw[c] = softplus_inverse(dx);
        self.dy_raw[c] = softplus_inverse(dy);
    }

    pub fn set_uniform_velocity(&mut self, c: usize, u: Real, v: Real) {
        self.u[c].data_mut().fill(u);
        self.v[c].data_mut().fill(v);
    }

    pub fn set_source(&mut self, c: usize, scale: Real, bias: Real) {
        self.source_scale[c] = scale;
        self.source_bias[c] = bias;
    }

    /// Number of scalars in the flat ordering.
    pub fn num_scalars(&self) -> usize {
        let field: usize = self.u.iter().map(|f| f.data().len()).sum();
        2 * field + 4 * self.channels
    }

    /// Flat ordering: `u` (channel-major, row-major), `v`, `dx_raw`, `dy_raw`,
    /// `source_scale`, `source_bias`.
    pub fn to_flat(&self) -> Vec<Real> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for f in self.u.iter().chain(&self.v) {
            out.extend_from_slice(f.data());
        }
        out.extend_from_slice(&self.dx_raw);
        out.extend_from_slice(&self.dy_raw);
        out.extend_from_slice(&self.source_scale);
        out.extend_from_slice(&self.source_bias);
        out
    }

    pub fn set_flat(&mut self, flat: &[Real]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Corrupt(format!(
                "PDE layer expects {} scalars, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for f in self.u.iter_mut().chain(self.v.iter_mut()) {
            for x in f.data_mut() {
                *x = it.next().unwrap();
            }
        }
        for x in self
            .dx_raw
            .iter_mut()
            .chain(self.dy_raw.iter_mut())
            .chain(self.source_scale.iter_mut())
            .chain(self.source_bias.iter_mut())
        {
            *x = it.next().unwrap();
        }
        Ok(())
    }

    /// Name of each contiguous segment of the flat ordering with its length.
    pub fn segments(&self) -> Vec<(&'static str, usize)> {
        let field: usize = self.u.iter().map(|f| f.data().len()).sum();
        vec![
            ("u", field),
            ("v", field),
            ("dx_raw", self.channels),
            ("dy_raw", self.channels),
            ("source_scale", self.channels),
            ("source_bias", self.channels),
        ]
    }

    /// Name of the parameter behind flat index `i`, e.g. `u[c=1,y=0,x=2]`.
    pub fn describe_index(&self, mut i: usize) -> String {
        let (fh, fw) = Self::field_dims(self.velocity_mode, self.height, self.width);
        for (name, len) in self.segments() {
            if i < len {
                return match name {
                    "u" | "v" => {
                        let c = i / (fh * fw);
                        let r = i % (fh * fw);
                        format!("{name}[c={c},y={},x={}]", r / fw, r % fw)
                    }
                    _ => format!("{name}[c={i}]"),
                };
            }
            i -= len;
        }
        format!("<index {i} out of range>")
    }

    pub(crate) fn add_assign(&mut self, other: &PdeLayerParams) {
        let mut flat = self.to_flat();
        for (a, b) in flat.iter_mut().zip(other.to_flat()) {
            *a += b;
        }
        self.set_flat(&flat).expect("same layout");
    }

    pub(crate) fn check_matches(&self, channels: usize, height: usize, width: usize) -> Result<()> {
        if channels != self.channels {
            return Err(Error::Config(format!(
                "input has {channels} channels, PDE layer expects {}",
                self.channels
            )));
        }
        if self.velocity_mode == VelocityMode::Spatial
            && (height != self.height || width != self.width)
        {
            return Err(Error::Config(format!(
                "input is {height}x{width}, spatial velocity fields are {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}
