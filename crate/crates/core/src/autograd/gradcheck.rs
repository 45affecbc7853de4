//! Central finite differences against the reverse sweep.

use std::fmt;

use serde::Serialize;

use super::engine::{backward_graph, forward_graph, GradientStore, PdeContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, GraphBuilder, Op};
use super::params::ParamSet;
use crate::error::Result;
use crate::pde::{Discretization, PdeLayerParams, VelocityMode};
use crate::tensor::{BoundaryMode, FeatureMap, Real, Shape};

/// Scalar losses with a closed-form gradient at the graph output.
#[derive(Debug, Clone)]
pub enum ProbeLoss {
    Sum,
    SumOfSquares,
    /// `Σ w ⊙ y` for a fixed weight map.
    Weighted(FeatureMap),
}

impl ProbeLoss {
    pub fn value_and_grad(&self, y: &FeatureMap) -> Result<(Real, FeatureMap)> {
        Ok(match self {
            ProbeLoss::Sum => (y.reduce_sum(), FeatureMap::filled(y.shape(), 1.0)),
            ProbeLoss::SumOfSquares => (y.mul(y)?.reduce_sum(), y.scaled(2.0)),
            ProbeLoss::Weighted(w) => (y.mul(w)?.reduce_sum(), w.clone()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub epsilon: Real,
    pub tolerance: Real,
    /// Differences at or below this are treated as agreement regardless of
    /// relative size.
    pub abs_floor: Real,
}

impl GradCheckConfig {
    /// `abs_floor` defaults to a thousandth of the tolerance.
    pub fn new(epsilon: Real, tolerance: Real) -> Self {
        Self {
            epsilon,
            tolerance,
            abs_floor: tolerance * 1e-3,
        }
    }
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self::new(1e-6, 1e-5)
    }
}

/// Worst disagreement inside one parameter tensor (or graph input).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    /// Relative error as judged against the tolerance; differences under
    /// `abs_floor` count as 0.
    pub worst_rel_error: Real,
    pub worst_abs_error: Real,
    pub worst_entry: String,
    pub analytic: Real,
    pub numeric: Real,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: Real,
    pub epsilon: Real,
    pub entries: Vec<ParamCheck>,
    /// Some relu input sat within `10·epsilon` of zero; resample and rerun.
    pub near_kink: bool,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.near_kink && self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.entries.iter().filter(|e| !e.passed).collect()
    }

    pub fn worst_rel_error(&self) -> Real {
        self.entries.iter().map(|e| e.worst_rel_error).fold(0.0, Real::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<4} {:<22} n={:<5} rel={:.3e} abs={:.3e} at {} (analytic {:.6e}, numeric {:.6e})",
                if e.passed { "ok" } else { "FAIL" },
                e.name,
                e.checked,
                e.worst_rel_error,
                e.worst_abs_error,
                e.worst_entry,
                e.analytic,
                e.numeric
            )?;
        }
        if self.near_kink {
            writeln!(f, "relu input within 10*epsilon of zero; resample the point")?;
        }
        write!(
            f,
            "{} at tolerance {:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.tolerance
        )
    }
}

struct Tally {
    check: ParamCheck,
}

impl Tally {
    fn new(name: String) -> Self {
        Self {
            check: ParamCheck {
                name,
                checked: 0,
                worst_rel_error: 0.0,
                worst_abs_error: 0.0,
                worst_entry: String::from("-"),
                analytic: 0.0,
                numeric: 0.0,
                passed: true,
            },
        }
    }

    fn record(&mut self, cfg: &GradCheckConfig, entry: impl FnOnce() -> String, a: Real, n: Real) {
        let c = &mut self.check;
        c.checked += 1;
        let diff = (a - n).abs();
        let rel = if diff <= cfg.abs_floor {
            0.0
        } else {
            diff / a.abs().max(n.abs())
        };
        let held = (c.analytic - c.numeric).abs();
        let worse = rel.is_nan() || rel > c.worst_rel_error || (rel == c.worst_rel_error && diff > held);
        if worse {
            c.worst_rel_error = rel;
            c.worst_entry = entry();
            c.analytic = a;
            c.numeric = n;
        }
        c.worst_abs_error = c.worst_abs_error.max(diff);
        if !(rel <= cfg.tolerance) {
            c.passed = false;
        }
    }
}

fn loss_at(
    graph: &Graph,
    params: &ParamSet,
    ctx: &PdeContext,
    inputs: &[FeatureMap],
    loss: &ProbeLoss,
) -> Result<Real> {
    let exec = forward_graph(graph, params, ctx, inputs)?;
    Ok(loss.value_and_grad(exec.output(graph))?.0)
}

fn entry_name(params: &ParamSet, segment: &str, local: usize) -> String {
    if let Some(rest) = segment.strip_prefix("pde") {
        if let Some((layer, field)) = rest.split_once('.') {
            if let Ok(layer) = layer.parse::<usize>() {
                let p = &params.pde[layer];
                let offset: usize = p
                    .segments()
                    .iter()
                    .take_while(|(n, _)| *n != field)
                    .map(|(_, l)| l)
                    .sum();
                return format!("pde{layer}.{}", p.describe_index(offset + local));
            }
        }
    }
    format!("{segment}[{local}]")
}

/// Compares every parameter and input gradient of `loss(graph(inputs))`
/// against central differences.
pub fn grad_check(
    graph: &Graph,
    params: &ParamSet,
    ctx: &PdeContext,
    inputs: &[FeatureMap],
    loss: &ProbeLoss,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport> {
    grad_check_with(graph, params, ctx, inputs, loss, cfg, |_| {})
}

/// Like [`grad_check`], but lets the caller alter the analytic gradients
/// before comparison.
pub fn grad_check_with(
    graph: &Graph,
    params: &ParamSet,
    ctx: &PdeContext,
    inputs: &[FeatureMap],
    loss: &ProbeLoss,
    cfg: GradCheckConfig,
    tamper: impl FnOnce(&mut GradientStore),
) -> Result<GradCheckReport> {
    let exec = forward_graph(graph, params, ctx, inputs)?;
    let near_kink = graph.nodes().iter().any(|n| {
        n.op == Op::Relu
            && exec
                .node_output(n.parents[0])
                .is_some_and(|x| x.data().iter().any(|v| v.abs() < 10.0 * cfg.epsilon))
    });
    let (_, dloss) = loss.value_and_grad(exec.output(graph))?;
    let mut store = backward_graph(graph, params, &exec, &dloss)?;
    tamper(&mut store);

    let mut entries = Vec::new();
    let analytic = store.params.to_flat();
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut offset = 0;
    for (name, len) in params.segments() {
        let mut tally = Tally::new(name.clone());
        for local in 0..len {
            let i = offset + local;
            let mut flat = base.clone();
            flat[i] = base[i] + cfg.epsilon;
            probe.set_flat(&flat)?;
            let plus = loss_at(graph, &probe, ctx, inputs, loss)?;
            flat[i] = base[i] - cfg.epsilon;
            probe.set_flat(&flat)?;
            let minus = loss_at(graph, &probe, ctx, inputs, loss)?;
            let numeric = (plus - minus) / (2.0 * cfg.epsilon);
            tally.record(&cfg, || entry_name(params, &name, local), analytic[i], numeric);
        }
        offset += len;
        entries.push(tally.check);
    }

    for slot in 0..inputs.len() {
        let mut tally = Tally::new(format!("input{slot}"));
        let zero = FeatureMap::zeros(inputs[slot].shape());
        let analytic = store.input(graph, slot).unwrap_or(&zero).clone();
        let mut perturbed = inputs.to_vec();
        for i in 0..inputs[slot].data().len() {
            let x = inputs[slot].data()[i];
            perturbed[slot].data_mut()[i] = x + cfg.epsilon;
            let plus = loss_at(graph, params, ctx, &perturbed, loss)?;
            perturbed[slot].data_mut()[i] = x - cfg.epsilon;
            let minus = loss_at(graph, params, ctx, &perturbed, loss)?;
            perturbed[slot].data_mut()[i] = x;
            let numeric = (plus - minus) / (2.0 * cfg.epsilon);
            tally.record(&cfg, || format!("input{slot}[{i}]"), analytic.data()[i], numeric);
        }
        entries.push(tally.check);
    }

    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        epsilon: cfg.epsilon,
        entries,
        near_kink,
    })
}

/// One randomly drawn PDE layer to check in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeCheckCase {
    pub k: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub velocity_mode: VelocityMode,
    pub boundary: BoundaryMode,
    pub seed: u64,
}

/// Checks a single PDE layer with `Δt = 1/K`, velocities in `±0.3`,
/// diffusion in `[0.05, 0.2)`, source terms in `±0.3`, inputs in `[0, 1)`
/// and a `±1` weighted-sum probe.
pub fn pde_layer_check(case: &PdeCheckCase, cfg: GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let mut layer = PdeLayerParams::zeros(case.channels, case.height, case.width, case.velocity_mode);
    let flat: Vec<Real> = (0..layer.num_scalars()).map(|_| rng.random_range(-0.3..0.3)).collect();
    layer.set_flat(&flat)?;
    for c in 0..case.channels {
        layer.set_diffusion(c, rng.random_range(0.05..0.2), rng.random_range(0.05..0.2));
    }
    let shape = Shape::new(1, case.channels, case.height, case.width);
    let mut draw = |lo: Real, hi: Real| {
        FeatureMap::from_vec(shape, (0..shape.len()).map(|_| rng.random_range(lo..hi)).collect())
    };
    let input = draw(0.0, 1.0)?;
    let probe = draw(-1.0, 1.0)?;
    let mut g = GraphBuilder::new();
    let x = g.input(0, case.channels);
    let y = g.pde(x, 0);
    let graph = g.finish(y)?;
    let ctx = PdeContext {
        disc: Discretization::new(case.k, 1.0 / case.k as Real),
        boundary: case.boundary,
    };
    let params = ParamSet {
        convs: vec![],
        pde: vec![layer],
    };
    grad_check(&graph, &params, &ctx, &[input], &ProbeLoss::Weighted(probe), cfg)
}
