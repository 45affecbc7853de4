//! Forward recurrence of the advection-diffusion layer.
//!
//! One iteration solves, per `(batch, channel, y, x)`,
//!
//! ```text
//! L·H[k+1] = M·H[k-1] − 2(u_x + v_y)·δt·H[k] + 2δt·f(I)
//!          + (−A_x + 2B_x)·H[k](x+1,y) + (A_x + 2B_x)·H[k](x−1,y)
//!          + (−A_y + 2B_y)·H[k](x,y+1) + (A_y + 2B_y)·H[k](x,y−1)
//! ```
//!
//! with `L = 1 + 2B_x + 2B_y`, `M = 1 − 2B_x − 2B_y`, `A_x = u·δt/(2δx)`,
//! `A_y = v·δt/(2δy)`, `B_x = D_x·δt/δx²`, `B_y = D_y·δt/δy²` and central
//! differences for `u_x`, `v_y`.
//!
//! Since `M = L − 4B_x − 4B_y`, the update is evaluated as
//! `H[k+1] = H[k-1] + N/L` where `N` groups each diffusion weight with its
//! second difference. The two forms are algebraically identical; the grouped
//! one leaves constant fields and the zero-parameter layer bit-exact.

use serde::{Deserialize, Serialize};

use super::params::{PdeLayerParams, VelocityMode};
use crate::error::{Error, Result};
use crate::metrics::macs::{
    MacCategory, MacCounter, PDE_SOURCE_MACS, PDE_SPATIAL_EXTRA_MACS, PDE_STENCIL_MACS,
};
use crate::tensor::{BoundaryMode, FeatureMap, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub delta_x: Real,
    pub delta_y: Real,
    pub delta_t: Real,
    pub k: usize,
}

impl Discretization {
    /// Unit grid spacing with the given iteration count and time step.
    pub fn new(k: usize, delta_t: Real) -> Self {
        Self {
            delta_x: 1.0,
            delta_y: 1.0,
            delta_t,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("iteration count K must be at least 1".into()));
        }
        for (name, v) in [
            ("delta_x", self.delta_x),
            ("delta_y", self.delta_y),
            ("delta_t", self.delta_t),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn total_time(&self) -> Real {
        self.k as Real * self.delta_t
    }
}

/// Discretization coefficients at one `(channel, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub l: Real,
    pub m: Real,
    pub a_x: Real,
    pub a_y: Real,
    pub b_x: Real,
    pub b_y: Real,
    pub u_x: Real,
    pub v_y: Real,
}

/// Per-channel constants hoisted out of the pixel loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ChannelConsts {
    pub b_x: Real,
    pub b_y: Real,
    pub l: Real,
    pub inv_l: Real,
    pub two_dt: Real,
    pub dt_2dx: Real,
    pub dt_2dy: Real,
    pub inv_2dx: Real,
    pub inv_2dy: Real,
}

impl ChannelConsts {
    pub(crate) fn new(params: &PdeLayerParams, disc: &Discretization, c: usize) -> Self {
        let b_x = params.diffusion_x(c) * disc.delta_t / (disc.delta_x * disc.delta_x);
        let b_y = params.diffusion_y(c) * disc.delta_t / (disc.delta_y * disc.delta_y);
        let l = 1.0 + 2.0 * b_x + 2.0 * b_y;
        Self {
            b_x,
            b_y,
            l,
            inv_l: 1.0 / l,
            two_dt: 2.0 * disc.delta_t,
            dt_2dx: disc.delta_t / (2.0 * disc.delta_x),
            dt_2dy: disc.delta_t / (2.0 * disc.delta_y),
            inv_2dx: 1.0 / (2.0 * disc.delta_x),
            inv_2dy: 1.0 / (2.0 * disc.delta_y),
        }
    }
}

/// Resolved neighbour indices for every row and column of a plane.
pub(crate) struct Neighbors {
    pub east: Vec<Option<usize>>,
    pub west: Vec<Option<usize>>,
    pub south: Vec<Option<usize>>,
    pub north: Vec<Option<usize>>,
}

impl Neighbors {
    pub(crate) fn new(height: usize, width: usize, mode: BoundaryMode) -> Self {
        let cols = |d: isize| {
            (0..width)
                .map(|x| mode.resolve(x as isize + d, width))
                .collect()
        };
        let rows = |d: isize| {
            (0..height)
                .map(|y| mode.resolve(y as isize + d, height))
                .collect()
        };
        Self {
            east: cols(1),
            west: cols(-1),
            south: rows(1),
            north: rows(-1),
        }
    }
}

#[inline]
pub(crate) fn read(plane: &[Real], width: usize, x: Option<usize>, y: Option<usize>) -> Real {
    match (x, y) {
        (Some(x), Some(y)) => plane[y * width + x],
        _ => 0.0,
    }
}

pub fn compute_coefficients(
    params: &PdeLayerParams,
    disc: &Discretization,
    channel: usize,
    x: usize,
    y: usize,
    mode: BoundaryMode,
) -> Result<CoefficientSet> {
    if channel >= params.channels {
        return Err(Error::OutOfRange(format!(
            "channel {channel} >= {}",
            params.channels
        )));
    }
    let cc = ChannelConsts::new(params, disc, channel);
    let (u, v, u_x, v_y) = match params.velocity_mode {
        VelocityMode::Uniform => (params.u[channel].get(0, 0), params.v[channel].get(0, 0), 0.0, 0.0),
        VelocityMode::Spatial => {
            let (uf, vf) = (&params.u[channel], &params.v[channel]);
            if x >= uf.width() || y >= uf.height() {
                return Err(Error::OutOfRange(format!(
                    "position ({x}, {y}) outside {}x{} velocity field",
                    uf.height(),
                    uf.width()
                )));
            }
            let u_x = (uf.neighbor(x, y, 1, 0, mode)? - uf.neighbor(x, y, -1, 0, mode)?) * cc.inv_2dx;
            let v_y = (vf.neighbor(x, y, 0, 1, mode)? - vf.neighbor(x, y, 0, -1, mode)?) * cc.inv_2dy;
            (uf.get(x, y), vf.get(x, y), u_x, v_y)
        }
    };
    Ok(CoefficientSet {
        l: cc.l,
        m: 1.0 - 2.0 * cc.b_x - 2.0 * cc.b_y,
        a_x: u * cc.dt_2dx,
        a_y: v * cc.dt_2dy,
        b_x: cc.b_x,
        b_y: cc.b_y,
        u_x,
        v_y,
    })
}

/// `f(I) = scale_c · I + bias_c`, pointwise per channel.
pub fn source_term(input: &FeatureMap, params: &PdeLayerParams) -> Result<FeatureMap> {
    let s = input.shape();
    if s.channels != params.channels {
        return Err(Error::Config(format!(
            "input has {} channels, source term expects {}",
            s.channels, params.channels
        )));
    }
    let mut out = FeatureMap::zeros(s);
    for b in 0..s.batch {
        for c in 0..s.channels {
            let (scale, bias) = (params.source_scale[c], params.source_bias[c]);
            for (o, &i) in out.plane_mut(b, c).iter_mut().zip(input.plane(b, c)) {
                *o = scale * i + bias;
            }
        }
    }
    Ok(out)
}

/// One iteration; returns `H[k+1]` given `H[k]`, `H[k-1]` and `f(I)`.
pub fn pde_step(
    h_k: &FeatureMap,
    h_km1: &FeatureMap,
    source: &FeatureMap,
    params: &PdeLayerParams,
    disc: &Discretization,
    mode: BoundaryMode,
) -> Result<FeatureMap> {
    disc.validate()?;
    h_k.ensure_same_shape(h_km1)?;
    h_k.ensure_same_shape(source)?;
    let s = h_k.shape();
    params.check_matches(s.channels, s.height, s.width)?;
    h_k.ensure_finite("H[k]")?;
    h_km1.ensure_finite("H[k-1]")?;
    source.ensure_finite("source term")?;
    let nb = Neighbors::new(s.height, s.width, mode);
    let mut out = FeatureMap::zeros(s);
    step_into(h_k, h_km1, source, params, disc, &nb, &mut out);
    Ok(out)
}

/// Unchecked iteration; returns the number of multiplies executed.
pub(crate) fn step_into(
    h_k: &FeatureMap,
    h_km1: &FeatureMap,
    source: &FeatureMap,
    params: &PdeLayerParams,
    disc: &Discretization,
    nb: &Neighbors,
    out: &mut FeatureMap,
) -> u64 {
    let s = h_k.shape();
    let (h, w) = (s.height, s.width);
    let mut macs = 0u64;
    for c in 0..s.channels {
        let cc = ChannelConsts::new(params, disc, c);
        let (two_bx, two_by) = (2.0 * cc.b_x, 2.0 * cc.b_y);
        let uf = params.u[c].data();
        let vf = params.v[c].data();
        let uniform = params.velocity_mode == VelocityMode::Uniform;
        // Hoisted per-channel advection weights for the uniform case.
        let (ua, va) = if uniform {
            (uf[0] * cc.dt_2dx, vf[0] * cc.dt_2dy)
        } else {
            (0.0, 0.0)
        };
        for b in 0..s.batch {
            let hk = h_k.plane(b, c);
            let hm = h_km1.plane(b, c);
            let src = source.plane(b, c);
            let o = out.plane_mut(b, c);
            for y in 0..h {
                let (ys, yn) = (nb.south[y], nb.north[y]);
                for x in 0..w {
                    let p = y * w + x;
                    let (xe, xw) = (nb.east[x], nb.west[x]);
                    let he = read(hk, w, xe, Some(y));
                    let hw = read(hk, w, xw, Some(y));
                    let hs = read(hk, w, Some(x), ys);
                    let hn = read(hk, w, Some(x), yn);
                    let twice_prev = hm[p] + hm[p];

                    let (ax, ay, div_term) = if uniform {
                        (ua, va, 0.0)
                    } else {
                        let ax = uf[p] * cc.dt_2dx;
                        let ay = vf[p] * cc.dt_2dy;
                        let u_x = (read(uf, w, xe, Some(y)) - read(uf, w, xw, Some(y))) * cc.inv_2dx;
                        let v_y = (read(vf, w, Some(x), ys) - read(vf, w, Some(x), yn)) * cc.inv_2dy;
                        let c0 = (u_x + v_y) * cc.two_dt;
                        (ax, ay, c0 * hk[p])
                    };

                    let n = two_bx * (he + hw - twice_prev)
                        + two_by * (hs + hn - twice_prev)
                        + ax * (hw - he)
                        + ay * (hn - hs)
                        - div_term
                        + cc.two_dt * src[p];
                    o[p] = hm[p] + n * cc.inv_l;

                    macs += PDE_STENCIL_MACS;
                    if !uniform {
                        macs += PDE_SPATIAL_EXTRA_MACS;
                    }
                }
            }
        }
    }
    macs
}

/// Every state visited by one forward pass, `H[-1], H[0], …, H[K]`.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub states: Vec<FeatureMap>,
    pub source: FeatureMap,
    pub disc: Discretization,
    pub boundary: BoundaryMode,
    /// Multiplies executed by this pass.
    pub macs: u64,
}

impl LayerTrace {
    pub fn output(&self) -> &FeatureMap {
        self.states.last().expect("trace holds at least H[-1] and H[0]")
    }

    pub fn is_complete(&self) -> bool {
        self.states.len() == self.disc.k + 2
    }
}

/// `K` iterations starting from `H[-1] = H[0] = input` with the source term
/// computed once from the input.
pub fn forward(
    input: &FeatureMap,
    params: &PdeLayerParams,
    disc: &Discretization,
    mode: BoundaryMode,
    counter: &mut MacCounter,
) -> Result<(FeatureMap, LayerTrace)> {
    disc.validate()?;
    let s = input.shape();
    params.check_matches(s.channels, s.height, s.width)?;
    input.ensure_finite("PDE layer input")?;

    let source = source_term(input, params)?;
    let mut macs = s.len() as u64 * PDE_SOURCE_MACS;
    let nb = Neighbors::new(s.height, s.width, mode);

    let mut states = Vec::with_capacity(disc.k + 2);
    states.push(input.clone());
    states.push(input.clone());
    for _ in 0..disc.k {
        let mut next = FeatureMap::zeros(s);
        let n = states.len();
        macs += step_into(&states[n - 1], &states[n - 2], &source, params, disc, &nb, &mut next);
        if !next.is_finite() {
            return Err(Error::NonFinite(format!(
                "PDE state after iteration {} of {}",
                n - 1,
                disc.k
            )));
        }
        states.push(next);
    }
    counter.add(MacCategory::Pde, macs);
    let trace = LayerTrace {
        states,
        source,
        disc: *disc,
        boundary: mode,
        macs,
    };
    Ok((trace.output().clone(), trace))
}

/// Stability diagnostics for an explicit scheme; never mutates anything.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CflReport {
    pub max_b_x: Real,
    pub max_b_y: Real,
    pub max_abs_a_x: Real,
    pub max_abs_a_y: Real,
    pub warnings: Vec<String>,
}

impl CflReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn cfl_diagnostic(params: &PdeLayerParams, disc: &Discretization) -> CflReport {
    let mut r = CflReport {
        max_b_x: 0.0,
        max_b_y: 0.0,
        max_abs_a_x: 0.0,
        max_abs_a_y: 0.0,
        warnings: Vec::new(),
    };
    for c in 0..params.channels {
        let cc = ChannelConsts::new(params, disc, c);
        r.max_b_x = r.max_b_x.max(cc.b_x);
        r.max_b_y = r.max_b_y.max(cc.b_y);
        let max_u = params.u[c].data().iter().fold(0.0 as Real, |m, v| m.max(v.abs()));
        let max_v = params.v[c].data().iter().fold(0.0 as Real, |m, v| m.max(v.abs()));
        r.max_abs_a_x = r.max_abs_a_x.max(max_u * cc.dt_2dx);
        r.max_abs_a_y = r.max_abs_a_y.max(max_v * cc.dt_2dy);
        if cc.b_x + cc.b_y > 0.5 {
            r.warnings.push(format!(
                "channel {c}: B_x + B_y = {:.4} > 0.5",
                cc.b_x + cc.b_y
            ));
        }
    }
    r
}
