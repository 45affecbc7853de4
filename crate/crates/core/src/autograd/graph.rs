use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Real;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// Reads `inputs[slot]`, which must have `channels` channels.
    Input { slot: usize, channels: usize },
    /// Index into `ParamSet::convs`.
    Conv2d { conv: usize },
    Relu,
    Add,
    Downsample2x,
    Upsample2x,
    ConcatChannels,
    /// Index into `ParamSet::pde`.
    Pde { layer: usize },
    Scale(Real),
}

impl Op {
    fn arity(&self) -> Option<usize> {
        match self {
            Op::Input { .. } => Some(0),
            Op::Add => Some(2),
            Op::ConcatChannels => None,
            _ => Some(1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Conv2d { .. } => "conv2d",
            Op::Relu => "relu",
            Op::Add => "add",
            Op::Downsample2x => "downsample2x",
            Op::Upsample2x => "upsample2x",
            Op::ConcatChannels => "concat_channels",
            Op::Pde { .. } => "pde_layer",
            Op::Scale(_) => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub op: Op,
    pub parents: Vec<NodeId>,
}

/// Immutable, validated computation graph with a fixed evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: Vec<Node>,
    order: Vec<NodeId>,
    output: NodeId,
}

impl Graph {
    /// Node ids must be `0..n` in position order. Fails on unknown parents,
    /// wrong arity or a cycle.
    pub fn new(nodes: Vec<Node>, output: NodeId) -> Result<Self> {
        let n = nodes.len();
        if output >= n {
            return Err(Error::Graph(format!("output node {output} does not exist")));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Graph(format!("node at position {i} has id {}", node.id)));
            }
            if let Some(&p) = node.parents.iter().find(|&&p| p >= n) {
                return Err(Error::Graph(format!("node {i} has unknown parent {p}")));
            }
            let ok = match node.op.arity() {
                Some(a) => node.parents.len() == a,
                None => !node.parents.is_empty(),
            };
            if !ok {
                return Err(Error::Graph(format!(
                    "node {i} ({}) has {} parents",
                    node.op.name(),
                    node.parents.len()
                )));
            }
        }
        let order = topological_order(&nodes)?;
        Ok(Self { nodes, order, output })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count_op(&self, pred: impl Fn(&Op) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.op)).count()
    }

    pub fn input_slots(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Input { slot, .. } => Some(slot + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &id in &self.order {
            let n = &self.nodes[id];
            write!(f, "%{id} = {}", n.op.name())?;
            match n.op {
                Op::Input { slot, channels } => write!(f, "[{slot}; c={channels}]")?,
                Op::Conv2d { conv } => write!(f, "[{conv}]")?,
                Op::Pde { layer } => write!(f, "[{layer}]")?,
                Op::Scale(s) => write!(f, "[{s}]")?,
                _ => {}
            }
            for p in &n.parents {
                write!(f, " %{p}")?;
            }
            writeln!(f)?;
        }
        write!(f, "return %{}", self.output)
    }
}

/// Kahn's algorithm, always releasing the smallest ready id first so the
/// order is a pure function of the node list.
fn topological_order(nodes: &[Node]) -> Result<Vec<NodeId>> {
    let n = nodes.len();
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for node in nodes {
        for &p in &node.parents {
            indegree[node.id] += 1;
            children[p].push(node.id);
        }
    }
    let mut ready: BTreeSet<NodeId> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(id) = ready.pop_first() {
        order.push(id);
        for &c in &children[id] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        let stuck: Vec<String> = (0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| i.to_string())
            .collect();
        return Err(Error::Graph(format!("cycle through nodes {}", stuck.join(", "))));
    }
    Ok(order)
}

/// Appends nodes with fresh ids.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, parents: Vec<NodeId>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { id, op, parents });
        id
    }

    pub fn input(&mut self, slot: usize, channels: usize) -> NodeId {
        self.push(Op::Input { slot, channels }, vec![])
    }

    pub fn conv(&mut self, x: NodeId, conv: usize) -> NodeId {
        self.push(Op::Conv2d { conv }, vec![x])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Relu, vec![x])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add, vec![a, b])
    }

    pub fn downsample(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Downsample2x, vec![x])
    }

    pub fn upsample(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Upsample2x, vec![x])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        self.push(Op::ConcatChannels, parts.to_vec())
    }

    pub fn pde(&mut self, x: NodeId, layer: usize) -> NodeId {
        self.push(Op::Pde { layer }, vec![x])
    }

    pub fn scale(&mut self, x: NodeId, factor: Real) -> NodeId {
        self.push(Op::Scale(factor), vec![x])
    }

    pub fn finish(self, output: NodeId) -> Result<Graph> {
        Graph::new(self.nodes, output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_rejected() {
        let nodes = vec![
            Node { id: 0, op: Op::Input { slot: 0, channels: 1 }, parents: vec![] },
            Node { id: 1, op: Op::Add, parents: vec![0, 2] },
            Node { id: 2, op: Op::Relu, parents: vec![1] },
        ];
        let err = Graph::new(nodes, 2).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn arity_and_parents_checked() {
        let bad = vec![Node { id: 0, op: Op::Relu, parents: vec![] }];
        assert!(Graph::new(bad, 0).is_err());
        let dangling = vec![Node { id: 0, op: Op::Relu, parents: vec![5] }];
        assert!(Graph::new(dangling, 0).is_err());
    }

    #[test]
    fn order_is_topological_and_stable() {
        let mut g = GraphBuilder::new();
        let x = g.input(0, 1);
        let a = g.relu(x);
        let b = g.scale(x, 2.0);
        let s = g.add(b, a);
        let graph = g.finish(s).unwrap();
        assert_eq!(graph.order(), &[0, 1, 2, 3]);
        assert_eq!(graph.input_slots(), 1);
        assert!(graph.to_string().ends_with("return %3"));
    }
}
