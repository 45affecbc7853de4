//! The advection-diffusion global feature layer.
//!
//! A layer evolves a feature map `H` for `K` explicit iterations of a
//! three-level finite-difference scheme, with learned per-channel velocities,
//! non-negative diffusion and an affine source term anchored to the input.
//! [`forward`] records every state in a [`LayerTrace`]; [`backward`] replays
//! it in reverse to produce exact gradients.

mod adjoint;
pub mod io;
mod params;
mod solver;

pub use adjoint::backward;
pub use params::{
    sigmoid, softplus, softplus_inverse, xavier_bound, PdeLayerParams, VelocityMode,
    INIT_SCALE, ZERO_DIFFUSION_RAW,
};
pub use solver::{
    cfl_diagnostic, compute_coefficients, forward, pde_step, source_term, CflReport,
    CoefficientSet, Discretization, LayerTrace,
};
