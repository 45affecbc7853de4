//! Reverse-mode differentiation over a fixed graph of image operations.
//!
//! A [`Graph`] is a validated template; [`forward_graph`] caches every node
//! output (and the full state trace of each PDE node), and
//! [`backward_graph`] walks the cached pass in reverse.

mod engine;
mod gradcheck;
mod graph;
pub mod ops;
mod params;

pub use engine::{backward_graph, forward_graph, Execution, GradientStore, PdeContext};
pub use gradcheck::{
    grad_check, grad_check_with, pde_layer_check, GradCheckConfig, GradCheckReport, ParamCheck, PdeCheckCase, ProbeLoss,
};
pub use graph::{Graph, GraphBuilder, Node, NodeId, Op};
pub use params::{ConvParams, ParamSet};
