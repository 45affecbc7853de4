pub mod autograd;
pub mod blob;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod net;
pub mod pde;
pub mod schedule;
pub mod seed;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{BoundaryMode, FeatureMap, Real, ScalarField2D, Shape};
