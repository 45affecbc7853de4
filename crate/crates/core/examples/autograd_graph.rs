//! Builds a tiny graph by hand (conv, relu, PDE layer, residual add), runs a
//! forward and reverse sweep and prints the gradient size per parameter group.
//!
//! cargo run --release --example autograd_graph

use pdeflow::autograd::{backward_graph, forward_graph, ConvParams, GraphBuilder, ParamSet, PdeContext};
use pdeflow::pde::{Discretization, PdeLayerParams, VelocityMode};
use pdeflow::{BoundaryMode, FeatureMap, Shape};

fn main() -> pdeflow::Result<()> {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 3);
    let h = g.conv(x, 0);
    let h = g.relu(h);
    let h = g.pde(h, 0);
    let h = g.conv(h, 1);
    let out = g.add(h, x);
    let graph = g.finish(out)?;

    let params = ParamSet {
        convs: vec![ConvParams::xavier(3, 4, 1), ConvParams::xavier(4, 3, 2)],
        pde: vec![PdeLayerParams::init(4, 8, 8, VelocityMode::Spatial, 3)?],
    };
    let ctx = PdeContext { disc: Discretization::new(3, 1.0 / 3.0), boundary: BoundaryMode::Replicate };

    let input = FeatureMap::from_vec(
        Shape::new(1, 3, 8, 8),
        (0..192).map(|i| ((i * 37) % 101) as pdeflow::Real / 101.0).collect(),
    )?;
    let exec = forward_graph(&graph, &params, &ctx, std::slice::from_ref(&input))?;
    let y = exec.output(&graph);
    println!("{} nodes, output mean {:.5}, macs {}", graph.len(), y.mean(), exec.macs.total());

    // d/dy of 0.5 * |y - input|^2
    let grads = backward_graph(&graph, &params, &exec, &y.sub(&input)?)?;
    let flat = grads.params.to_flat();
    let mut offset = 0;
    for (name, n) in grads.params.segments() {
        let norm = flat[offset..offset + n].iter().map(|v| v * v).sum::<pdeflow::Real>().sqrt();
        println!("{name:<24} {n:>5} scalars  |grad| {norm:.4e}");
        offset += n;
    }
    Ok(())
}
