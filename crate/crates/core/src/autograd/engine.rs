use super::graph::{Graph, NodeId, Op};
use super::ops;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::metrics::macs::{MacCategory, MacCounter};
use crate::pde::{self, Discretization, LayerTrace};
use crate::tensor::{BoundaryMode, FeatureMap, Shape};

/// Settings shared by every PDE node during one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeContext {
    pub disc: Discretization,
    pub boundary: BoundaryMode,
}

impl Default for PdeContext {
    fn default() -> Self {
        Self {
            disc: Discretization::new(5, 1.0),
            boundary: BoundaryMode::Replicate,
        }
    }
}

/// Cached results of one forward pass.
#[derive(Debug, Clone)]
pub struct Execution {
    outputs: Vec<Option<FeatureMap>>,
    traces: Vec<Option<LayerTrace>>,
    pub macs: MacCounter,
}

impl Execution {
    pub fn node_output(&self, id: NodeId) -> Option<&FeatureMap> {
        self.outputs.get(id).and_then(|o| o.as_ref())
    }

    pub fn output(&self, graph: &Graph) -> &FeatureMap {
        self.outputs[graph.output()]
            .as_ref()
            .expect("forward populates every node")
    }

    pub fn into_output(mut self, graph: &Graph) -> FeatureMap {
        self.outputs[graph.output()].take().expect("forward populates every node")
    }

    pub fn trace(&self, id: NodeId) -> Option<&LayerTrace> {
        self.traces.get(id).and_then(|t| t.as_ref())
    }

    /// Drop cached outputs to simulate an engine that never ran forward.
    pub fn clear_node(&mut self, id: NodeId) {
        self.outputs[id] = None;
        self.traces[id] = None;
    }
}

/// Accumulated gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct GradientStore {
    pub nodes: Vec<Option<FeatureMap>>,
    pub params: ParamSet,
}

impl GradientStore {
    pub fn node(&self, id: NodeId) -> Option<&FeatureMap> {
        self.nodes.get(id).and_then(|g| g.as_ref())
    }

    /// Gradient reaching the input node that reads `slot`, if it was reached.
    pub fn input(&self, graph: &Graph, slot: usize) -> Option<&FeatureMap> {
        graph
            .nodes()
            .iter()
            .find(|n| matches!(n.op, Op::Input { slot: s, .. } if s == slot))
            .and_then(|n| self.node(n.id))
    }
}

fn check_param_index(kind: &str, idx: usize, len: usize) -> Result<()> {
    if idx >= len {
        return Err(Error::Graph(format!("{kind} index {idx} but only {len} present")));
    }
    Ok(())
}

pub fn forward_graph(
    graph: &Graph,
    params: &ParamSet,
    ctx: &PdeContext,
    inputs: &[FeatureMap],
) -> Result<Execution> {
    let n = graph.len();
    let mut outputs: Vec<Option<FeatureMap>> = vec![None; n];
    let mut traces: Vec<Option<LayerTrace>> = vec![None; n];
    let mut macs = MacCounter::new();
    for &id in graph.order() {
        let node = graph.node(id);
        let parent = |i: usize| -> &FeatureMap {
            outputs[node.parents[i]].as_ref().expect("parents precede children")
        };
        let out = match &node.op {
            Op::Input { slot, channels } => {
                let x = inputs.get(*slot).ok_or_else(|| {
                    Error::Graph(format!("input slot {slot} missing ({} given)", inputs.len()))
                })?;
                if x.shape().channels != *channels {
                    return Err(Error::ShapeMismatch {
                        expected: x.shape().with_channels(*channels),
                        actual: x.shape(),
                    });
                }
                x.clone()
            }
            Op::Conv2d { conv } => {
                check_param_index("conv", *conv, params.convs.len())?;
                let (y, m) = ops::conv2d(parent(0), &params.convs[*conv])?;
                macs.add(MacCategory::Conv, m);
                y
            }
            Op::Relu => ops::relu(parent(0)),
            Op::Add => parent(0).add(parent(1))?,
            Op::Downsample2x => {
                let (y, m) = ops::downsample2x(parent(0))?;
                macs.add(MacCategory::Other, m);
                y
            }
            Op::Upsample2x => ops::upsample2x(parent(0)),
            Op::ConcatChannels => {
                let parts: Vec<&FeatureMap> = (0..node.parents.len()).map(parent).collect();
                ops::concat_channels(&parts)?
            }
            Op::Pde { layer } => {
                check_param_index("PDE layer", *layer, params.pde.len())?;
                let (y, trace) = pde::forward(
                    parent(0),
                    &params.pde[*layer],
                    &ctx.disc,
                    ctx.boundary,
                    &mut macs,
                )?;
                traces[id] = Some(trace);
                y
            }
            Op::Scale(f) => {
                let x = parent(0);
                macs.add(MacCategory::Other, x.shape().len() as u64);
                x.scaled(*f)
            }
        };
        outputs[id] = Some(out);
    }
    Ok(Execution { outputs, traces, macs })
}

fn add_grad(slot: &mut Option<FeatureMap>, g: FeatureMap) -> Result<()> {
    match slot {
        Some(acc) => acc.accumulate(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Reverse sweep from `loss_grad` at the graph output. Fan-out gradients are
/// summed in reverse evaluation order.
pub fn backward_graph(
    graph: &Graph,
    params: &ParamSet,
    exec: &Execution,
    loss_grad: &FeatureMap,
) -> Result<GradientStore> {
    let n = graph.len();
    let cached = |id: NodeId| -> Result<&FeatureMap> {
        exec.node_output(id)
            .ok_or_else(|| Error::Graph(format!("node {id} has no cached output; run forward first")))
    };
    let out_shape = cached(graph.output())?.shape();
    if loss_grad.shape() != out_shape {
        return Err(Error::ShapeMismatch {
            expected: out_shape,
            actual: loss_grad.shape(),
        });
    }
    let mut grads: Vec<Option<FeatureMap>> = vec![None; n];
    grads[graph.output()] = Some(loss_grad.clone());
    let mut pgrad = params.zeros_like();

    for &id in graph.order().iter().rev() {
        let Some(g) = grads[id].clone() else { continue };
        let node = graph.node(id);
        cached(id)?;
        match &node.op {
            Op::Input { .. } => {}
            Op::Conv2d { conv } => {
                let x = cached(node.parents[0])?;
                let (gx, gc) = ops::conv2d_backward(x, &params.convs[*conv], &g);
                let acc = &mut pgrad.convs[*conv];
                for (a, b) in acc.weight.iter_mut().zip(&gc.weight) {
                    *a += b;
                }
                for (a, b) in acc.bias.iter_mut().zip(&gc.bias) {
                    *a += b;
                }
                add_grad(&mut grads[node.parents[0]], gx)?;
            }
            Op::Relu => {
                let x = cached(node.parents[0])?;
                add_grad(&mut grads[node.parents[0]], ops::relu_backward(x, &g))?;
            }
            Op::Add => {
                add_grad(&mut grads[node.parents[0]], g.clone())?;
                add_grad(&mut grads[node.parents[1]], g)?;
            }
            Op::Downsample2x => {
                let s = cached(node.parents[0])?.shape();
                add_grad(&mut grads[node.parents[0]], ops::downsample2x_backward(s, &g))?;
            }
            Op::Upsample2x => {
                let s = cached(node.parents[0])?.shape();
                add_grad(&mut grads[node.parents[0]], ops::upsample2x_backward(s, &g))?;
            }
            Op::ConcatChannels => {
                let shapes: Vec<Shape> = node
                    .parents
                    .iter()
                    .map(|&p| cached(p).map(|x| x.shape()))
                    .collect::<Result<_>>()?;
                for (&p, gp) in node.parents.iter().zip(ops::concat_channels_backward(&shapes, &g)) {
                    add_grad(&mut grads[p], gp)?;
                }
            }
            Op::Pde { layer } => {
                let trace = exec
                    .trace(id)
                    .ok_or_else(|| Error::Trace(format!("PDE node {id} has no stored trace")))?;
                let (gx, gp) = pde::backward(trace, &g, &params.pde[*layer])?;
                pgrad.pde[*layer].add_assign(&gp);
                add_grad(&mut grads[node.parents[0]], gx)?;
            }
            Op::Scale(f) => {
                add_grad(&mut grads[node.parents[0]], g.scaled(*f))?;
            }
        }
    }
    Ok(GradientStore { nodes: grads, params: pgrad })
}
