use pdeflow::autograd::{
    backward_graph, forward_graph, grad_check, grad_check_with, ConvParams, GradCheckConfig, GraphBuilder,
    ParamSet, PdeContext, ProbeLoss,
};
use pdeflow::pde::{Discretization, PdeLayerParams, VelocityMode};
use pdeflow::{BoundaryMode, FeatureMap, Real, Shape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(shape: Shape, seed: u64, lo: Real, hi: Real) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| rng.random_range(lo..hi)).collect();
    FeatureMap::from_vec(shape, data).unwrap()
}

fn randomize_pde(p: &mut PdeLayerParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = p.to_flat();
    for v in flat.iter_mut() {
        *v = rng.random_range(-0.3..0.3);
    }
    p.set_flat(&flat).unwrap();
    for c in 0..p.channels {
        p.set_diffusion(c, rng.random_range(0.05..0.2), rng.random_range(0.05..0.2));
    }
}

fn ctx(k: usize, dt: Real) -> PdeContext {
    PdeContext {
        disc: Discretization::new(k, dt),
        boundary: BoundaryMode::Replicate,
    }
}

#[test]
fn identity_graph_passes_input_and_ones() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 2);
    let graph = g.finish(x).unwrap();
    let input = random_map(Shape::new(1, 2, 3, 3), 1, -1.0, 1.0);
    let exec = forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input.clone()]).unwrap();
    assert_eq!(exec.output(&graph), &input);
    let ones = FeatureMap::filled(input.shape(), 1.0);
    let store = backward_graph(&graph, &ParamSet::default(), &exec, &ones).unwrap();
    assert_eq!(store.input(&graph, 0).unwrap(), &ones);
}

#[test]
fn scale_doubles() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 1);
    let y = g.scale(x, 2.0);
    let graph = g.finish(y).unwrap();
    let input = random_map(Shape::new(1, 1, 4, 4), 2, -1.0, 1.0);
    let exec = forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input.clone()]).unwrap();
    assert_eq!(exec.output(&graph), &input.scaled(2.0));
}

#[test]
fn zero_pde_node_is_identity() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 2);
    let y = g.pde(x, 0);
    let graph = g.finish(y).unwrap();
    let params = ParamSet {
        convs: vec![],
        pde: vec![PdeLayerParams::zeros(2, 5, 5, VelocityMode::Spatial)],
    };
    let input = random_map(Shape::new(1, 2, 5, 5), 3, 0.0, 1.0);
    let exec = forward_graph(&graph, &params, &ctx(5, 1.0), &[input.clone()]).unwrap();
    assert_eq!(exec.output(&graph), &input);
    assert!(exec.trace(y).unwrap().is_complete());
}

#[test]
fn fan_out_sums_gradients() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 1);
    let y = g.add(x, x);
    let graph = g.finish(y).unwrap();
    let input = random_map(Shape::new(1, 1, 2, 2), 4, -1.0, 1.0);
    let exec = forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input.clone()]).unwrap();
    let lg = random_map(input.shape(), 5, -1.0, 1.0);
    let store = backward_graph(&graph, &ParamSet::default(), &exec, &lg).unwrap();
    assert_eq!(store.input(&graph, 0).unwrap(), &lg.scaled(2.0));
}

#[test]
fn backward_without_forward_cache_errors() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 1);
    let r = g.relu(x);
    let y = g.scale(r, 3.0);
    let graph = g.finish(y).unwrap();
    let input = random_map(Shape::new(1, 1, 2, 2), 6, -1.0, 1.0);
    let mut exec = forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input]).unwrap();
    exec.clear_node(r);
    let lg = FeatureMap::filled(Shape::new(1, 1, 2, 2), 1.0);
    assert!(backward_graph(&graph, &ParamSet::default(), &exec, &lg).is_err());
}

#[test]
fn input_channel_mismatch_errors() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 3);
    let graph = g.finish(x).unwrap();
    let input = FeatureMap::zeros(Shape::new(1, 2, 2, 2));
    assert!(forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input]).is_err());
}

#[test]
fn quadratic_gradient_is_six_at_three() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 1);
    let graph = g.finish(x).unwrap();
    let input = FeatureMap::filled(Shape::new(1, 1, 1, 1), 3.0);
    let exec = forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input.clone()]).unwrap();
    let (value, grad) = ProbeLoss::SumOfSquares.value_and_grad(exec.output(&graph)).unwrap();
    assert_eq!(value, 9.0);
    let store = backward_graph(&graph, &ParamSet::default(), &exec, &grad).unwrap();
    assert_eq!(store.input(&graph, 0).unwrap().data(), &[6.0]);
    let report = grad_check(
        &graph,
        &ParamSet::default(),
        &PdeContext::default(),
        &[input],
        &ProbeLoss::SumOfSquares,
        GradCheckConfig::new(1e-4, 1e-9),
    )
    .unwrap();
    assert!(report.passed(), "{report}");
    assert!((report.entries[0].numeric - 6.0).abs() < 1e-8);
}

fn conv_pde_conv(channels: usize, h: usize, w: usize, mode: VelocityMode, seed: u64) -> (pdeflow::autograd::Graph, ParamSet) {
    let mut g = GraphBuilder::new();
    let x = g.input(0, channels);
    let a = g.conv(x, 0);
    let p = g.pde(a, 0);
    let b = g.conv(p, 1);
    let graph = g.finish(b).unwrap();
    let mut c0 = ConvParams::xavier(channels, channels, seed);
    let mut c1 = ConvParams::xavier(channels, channels, seed + 1);
    c0.bias.iter_mut().enumerate().for_each(|(i, b)| *b = 0.1 * i as Real - 0.05);
    c1.bias.iter_mut().enumerate().for_each(|(i, b)| *b = 0.02 * i as Real);
    let mut pde = PdeLayerParams::zeros(channels, h, w, mode);
    randomize_pde(&mut pde, seed + 2);
    (graph, ParamSet { convs: vec![c0, c1], pde: vec![pde] })
}

#[test]
fn two_conv_one_pde_graph_matches_finite_differences() {
    for mode in [VelocityMode::Spatial, VelocityMode::Uniform] {
        let (graph, params) = conv_pde_conv(2, 6, 6, mode, 11);
        let input = random_map(Shape::new(1, 2, 6, 6), 12, 0.0, 1.0);
        let probe = random_map(Shape::new(1, 2, 6, 6), 13, -1.0, 1.0);
        let report = grad_check(
            &graph,
            &params,
            &ctx(3, 0.5),
            &[input],
            &ProbeLoss::Weighted(probe),
            GradCheckConfig::new(1e-6, 1e-5),
        )
        .unwrap();
        assert!(report.passed(), "{mode:?}\n{report}");
    }
}

#[test]
fn pde_only_graph_k5_passes() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 2);
    let y = g.pde(x, 0);
    let graph = g.finish(y).unwrap();
    let mut pde = PdeLayerParams::zeros(2, 5, 5, VelocityMode::Spatial);
    randomize_pde(&mut pde, 21);
    let params = ParamSet { convs: vec![], pde: vec![pde] };
    let input = random_map(Shape::new(1, 2, 5, 5), 22, 0.0, 1.0);
    let probe = random_map(input.shape(), 23, -1.0, 1.0);
    let report = grad_check(
        &graph,
        &params,
        &ctx(5, 0.4),
        &[input],
        &ProbeLoss::Weighted(probe),
        GradCheckConfig::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn corrupted_adjoint_is_named() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 1);
    let y = g.pde(x, 0);
    let graph = g.finish(y).unwrap();
    let mut pde = PdeLayerParams::zeros(1, 5, 5, VelocityMode::Spatial);
    randomize_pde(&mut pde, 31);
    let params = ParamSet { convs: vec![], pde: vec![pde] };
    let input = random_map(Shape::new(1, 1, 5, 5), 32, 0.0, 1.0);
    let probe = random_map(input.shape(), 33, -1.0, 1.0);
    // Shift the velocity gradient one column east, as an off-by-one stencil would.
    let report = grad_check_with(
        &graph,
        &params,
        &ctx(3, 0.5),
        &[input],
        &ProbeLoss::Weighted(probe),
        GradCheckConfig::default(),
        |store| {
            let gu = store.params.pde[0].u[0].data_mut();
            gu.rotate_right(1);
        },
    )
    .unwrap();
    assert!(!report.passed());
    let failed: Vec<&str> = report.failures().iter().map(|f| f.name.as_str()).collect();
    assert_eq!(failed, vec!["pde0.u"], "{report}");
    assert!(report.failures()[0].worst_entry.starts_with("pde0.u[c=0"));
}

#[test]
fn tolerance_below_roundoff_fails() {
    let (graph, params) = conv_pde_conv(1, 4, 4, VelocityMode::Uniform, 41);
    let input = random_map(Shape::new(1, 1, 4, 4), 42, 0.0, 1.0);
    let report = grad_check(
        &graph,
        &params,
        &ctx(2, 0.5),
        &[input],
        &ProbeLoss::Sum,
        GradCheckConfig::new(1e-6, 1e-12),
    )
    .unwrap();
    assert!(!report.passed());
}

#[test]
fn relu_near_zero_is_flagged() {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 1);
    let r = g.relu(x);
    let graph = g.finish(r).unwrap();
    let input = FeatureMap::from_vec(Shape::new(1, 1, 1, 2), vec![1e-7, 0.5]).unwrap();
    let report = grad_check(
        &graph,
        &ParamSet::default(),
        &PdeContext::default(),
        &[input],
        &ProbeLoss::Sum,
        GradCheckConfig::default(),
    )
    .unwrap();
    assert!(report.near_kink);
    assert!(!report.passed());
}

#[test]
fn mac_counter_splits_categories() {
    let (graph, params) = conv_pde_conv(2, 6, 6, VelocityMode::Spatial, 51);
    let input = random_map(Shape::new(1, 2, 6, 6), 52, 0.0, 1.0);
    let exec = forward_graph(&graph, &params, &ctx(4, 0.25), &[input]).unwrap();
    assert_eq!(exec.macs.conv(), 2 * (2 * 2 * 9 * 36));
    assert_eq!(exec.macs.pde(), 72 + 72 * 4 * 12);
    assert_eq!(exec.macs.other(), 0);
}

/// A graph of only linear operations, checked one scalar at a time.
fn linear_graph() -> pdeflow::autograd::Graph {
    let mut g = GraphBuilder::new();
    let x = g.input(0, 2);
    let a = g.conv(x, 0);
    let d = g.downsample(a);
    let u = g.upsample(d);
    let s = g.scale(x, -0.7);
    let c = g.concat(&[u, s]);
    let m = g.conv(c, 1);
    let y = g.add(m, x);
    g.finish(y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_ops_agree_with_finite_differences(seed in 0u64..1000, hh in 1usize..4, ww in 1usize..4) {
        let (h, w) = (2 * hh, 2 * ww);
        let graph = linear_graph();
        let mut params = ParamSet {
            convs: vec![ConvParams::xavier(2, 3, seed), ConvParams::xavier(5, 2, seed + 1)],
            pde: vec![],
        };
        params.convs[0].bias = vec![0.1, -0.2, 0.3];
        let input = random_map(Shape::new(2, 2, h, w), seed + 2, -1.0, 1.0);
        let probe = random_map(input.shape(), seed + 3, -1.0, 1.0);
        let report = grad_check(
            &graph,
            &params,
            &PdeContext::default(),
            &[input],
            &ProbeLoss::Weighted(probe),
            GradCheckConfig::new(1e-4, 1e-7),
        ).unwrap();
        prop_assert!(report.passed(), "{}", report);
    }

    #[test]
    fn relu_gradient_is_strict_indicator(vals in proptest::collection::vec(-2.0f64..2.0, 1..16)) {
        let n = vals.len();
        let mut g = GraphBuilder::new();
        let x = g.input(0, 1);
        let r = g.relu(x);
        let graph = g.finish(r).unwrap();
        let input = FeatureMap::from_vec(Shape::new(1, 1, 1, n), vals.iter().map(|&v| v as Real).collect()).unwrap();
        let exec = forward_graph(&graph, &ParamSet::default(), &PdeContext::default(), &[input.clone()]).unwrap();
        let ones = FeatureMap::filled(input.shape(), 1.0);
        let store = backward_graph(&graph, &ParamSet::default(), &exec, &ones).unwrap();
        for (g, v) in store.input(&graph, 0).unwrap().data().iter().zip(input.data()) {
            prop_assert_eq!(*g, if *v > 0.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn forward_is_deterministic(seed in 0u64..1000) {
        let (graph, params) = conv_pde_conv(2, 4, 4, VelocityMode::Spatial, seed);
        let input = random_map(Shape::new(1, 2, 4, 4), seed, 0.0, 1.0);
        let a = forward_graph(&graph, &params, &ctx(2, 0.5), &[input.clone()]).unwrap();
        let b = forward_graph(&graph, &params, &ctx(2, 0.5), &[input]).unwrap();
        prop_assert_eq!(a.output(&graph), b.output(&graph));
    }
}
