use pdeflow::autograd::{forward_graph, grad_check, ConvParams, GradCheckConfig, Op, ProbeLoss};
use pdeflow::metrics::macs::{conv3x3_macs, pde_layer_macs};
use pdeflow::net::{build, build_graph, init_params, Model, NetConfig};
use pdeflow::pde::{Discretization, PdeLayerParams, VelocityMode};
use pdeflow::{FeatureMap, Shape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn image(shape: Shape, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_vec(shape, (0..shape.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

/// Written out level by level, independently of `conv_shapes`.
fn expected_param_count(depth: usize, base: usize, pde_layers: usize, h: usize, w: usize, spatial: bool, skip: bool) -> usize {
    let conv = |i: usize, o: usize| 9 * i * o + o;
    let ch = |l: usize| base * (1 << l);
    let mut total = conv(3, base) + conv(base, base);
    for l in 1..=depth {
        total += conv(ch(l - 1), ch(l)) + conv(ch(l), ch(l));
    }
    for l in 0..depth {
        let mix_in = ch(l + 1) + if skip { ch(l) } else { 0 };
        total += conv(mix_in, ch(l)) + conv(ch(l), ch(l));
    }
    total += conv(base, 3);
    let c = ch(depth);
    let field = if spatial { c * (h >> depth) * (w >> depth) } else { c };
    total + pde_layers * (2 * field + 4 * c)
}

#[test]
fn default_parameter_count() {
    let cfg = NetConfig::default();
    assert_eq!(cfg.param_count(), 51_091);
    assert_eq!(init_params(&cfg, 0).unwrap().num_scalars(), 51_091);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn parameter_count_matches_formula(
        depth in 1usize..4,
        base in 1usize..6,
        pde_layers in 0usize..6,
        mult in 1usize..3,
        spatial in any::<bool>(),
        skip in any::<bool>(),
    ) {
        let size = mult << depth;
        let cfg = NetConfig {
            depth,
            base_channels: base,
            pde_layers,
            velocity_mode: if spatial { VelocityMode::Spatial } else { VelocityMode::Uniform },
            skip_connections: skip,
            height: size,
            width: 2 * size,
            ..NetConfig::default()
        };
        let expected = expected_param_count(depth, base, pde_layers, size, 2 * size, spatial, skip);
        prop_assert_eq!(cfg.param_count(), expected);
        prop_assert_eq!(init_params(&cfg, 3).unwrap().num_scalars(), expected);
    }
}

#[test]
fn baseline_has_no_pde_nodes() {
    let cfg = NetConfig { pde_layers: 0, ..NetConfig::default() };
    let g = build_graph(&cfg).unwrap();
    assert_eq!(g.count_op(|op| matches!(op, Op::Pde { .. })), 0);
}

#[test]
fn five_pde_nodes_in_sequence_at_8x8() {
    let model = Model::new(NetConfig::default(), 7).unwrap();
    assert_eq!(model.pde_node_count(), 5);
    let pde_ids: Vec<usize> = model
        .graph
        .nodes()
        .iter()
        .filter(|n| matches!(n.op, Op::Pde { .. }))
        .map(|n| n.id)
        .collect();
    for pair in pde_ids.windows(2) {
        assert_eq!(model.graph.node(pair[1]).parents, vec![pair[0]]);
    }
    let x = image(Shape::new(1, 3, 32, 32), 1);
    let exec = model.forward(&x, Discretization::new(1, 5.0)).unwrap();
    for id in pde_ids {
        assert_eq!(exec.node_output(id).unwrap().shape(), Shape::new(1, 32, 8, 8));
    }
    assert_eq!(exec.output(&model.graph).shape(), x.shape());
}

#[test]
fn zero_pde_stack_equals_baseline_exactly() {
    let with = NetConfig::default();
    let without = NetConfig { pde_layers: 0, ..with };
    let (g5, mut p5) = build(&with, 11).unwrap();
    let (g0, p0) = build(&without, 11).unwrap();
    assert_eq!(p5.convs, p0.convs);
    for p in &mut p5.pde {
        *p = PdeLayerParams::zeros(p.channels, p.height, p.width, p.velocity_mode);
    }
    let x = image(Shape::new(2, 3, 32, 32), 2);
    let ctx = with.context(Discretization::new(5, 1.0));
    let a = forward_graph(&g5, &p5, &ctx, &[x.clone()]).unwrap();
    let b = forward_graph(&g0, &p0, &ctx, &[x]).unwrap();
    assert_eq!(a.output(&g5), b.output(&g0));
}

#[test]
fn zero_final_conv_gives_constant_bias_map() {
    let cfg = NetConfig { global_residual: false, ..NetConfig::default() };
    let mut model = Model::new(cfg, 5).unwrap();
    let last = model.params.convs.last_mut().unwrap();
    last.weight.iter_mut().for_each(|w| *w = 0.0);
    last.bias = vec![0.25, 0.5, 0.75];
    let y = model.predict(&image(Shape::new(1, 3, 32, 32), 3), Discretization::new(5, 1.0)).unwrap();
    for c in 0..3 {
        assert!(y.plane(0, c).iter().all(|&v| v == [0.25, 0.5, 0.75][c]));
    }
}

#[test]
fn twin_params_give_identical_outputs() {
    let a = Model::new(NetConfig::default(), 99).unwrap();
    let b = Model::new(NetConfig::default(), 99).unwrap();
    assert_eq!(a.params, b.params);
    let x = image(Shape::new(1, 3, 32, 32), 4);
    let d = Discretization::new(3, 5.0 / 3.0);
    assert_eq!(a.predict(&x, d).unwrap(), b.predict(&x, d).unwrap());
    let c = Model::new(NetConfig::default(), 100).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn predict_clamps_to_unit_interval() {
    let mut model = Model::new(NetConfig::default(), 5).unwrap();
    model.params.convs.last_mut().unwrap().bias = vec![-3.0, 0.1, 3.0];
    let x = image(Shape::new(1, 3, 32, 32), 5);
    let y = model.predict(&x, Discretization::new(1, 5.0)).unwrap();
    assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let raw = model.forward(&x, Discretization::new(1, 5.0)).unwrap();
    assert!(raw.output(&model.graph).data().iter().any(|&v| !(0.0..=1.0).contains(&v)));
}

#[test]
fn wrong_input_shape_errors() {
    let model = Model::new(NetConfig::default(), 1).unwrap();
    assert!(model.predict(&FeatureMap::zeros(Shape::new(1, 3, 16, 16)), Discretization::new(1, 5.0)).is_err());
}

#[test]
fn mac_count_at_32x32_is_pinned() {
    let model = Model::new(NetConfig::default(), 1).unwrap();
    let (_, macs) = model
        .predict_counted(&image(Shape::new(1, 3, 32, 32), 6), Discretization::new(5, 1.0))
        .unwrap();
    // Conv layer by layer: (in, out, side).
    let convs = [
        (3, 8, 32), (8, 8, 32), (8, 16, 16), (16, 16, 16), (16, 32, 8), (32, 32, 8),
        (48, 16, 16), (16, 16, 16), (24, 8, 32), (8, 8, 32), (8, 3, 32),
    ];
    let conv: u64 = convs
        .iter()
        .map(|&(i, o, s)| conv3x3_macs(Shape::new(1, i, s, s), o))
        .sum();
    assert_eq!(conv, 7_520_256);
    assert_eq!(macs.conv(), conv);
    let pde = 5 * pde_layer_macs(Shape::new(1, 32, 8, 8), 5, VelocityMode::Spatial);
    assert_eq!(pde, 624_640);
    assert_eq!(macs.pde(), pde);
    assert_eq!(macs.other(), 8 * 32 * 32 + 16 * 16 * 16);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mac_model_matches_counter(depth in 1usize..3, base in 1usize..4, layers in 0usize..3, k in 1usize..6, uniform in any::<bool>(), skips in any::<bool>()) {
        let f = 1 << depth;
        let cfg = NetConfig {
            depth,
            base_channels: base,
            pde_layers: layers,
            velocity_mode: if uniform { VelocityMode::Uniform } else { VelocityMode::Spatial },
            skip_connections: skips,
            height: 2 * f,
            width: 3 * f,
            ..NetConfig::default()
        };
        let model = Model::new(cfg, 1).unwrap();
        let (_, counted) = model.predict_counted(&FeatureMap::zeros(cfg.input_shape(1)), Discretization::new(k, 1.0 / k as f64)).unwrap();
        prop_assert_eq!(counted, cfg.mac_model(k));
    }
}

#[test]
fn residual_net_starts_as_identity() {
    let model = Model::new(NetConfig::default(), 5).unwrap();
    let x = image(NetConfig::default().input_shape(2), 12);
    let out = model.forward(&x, Discretization::new(5, 0.2)).unwrap().into_output(&model.graph);
    assert_eq!(out, x);
}

#[test]
fn tiny_network_gradients_match_finite_differences() {
    let cfg = NetConfig {
        depth: 1,
        base_channels: 2,
        pde_layers: 2,
        height: 4,
        width: 4,
        ..NetConfig::default()
    };
    let graph = build_graph(&cfg).unwrap();
    let probe = image(Shape::new(1, 3, 4, 4), 8).map(|v| v - 0.5);
    let mut checked = false;
    for seed in 0..20u64 {
        let mut params = init_params(&cfg, seed).unwrap();
        // The final conv starts at zero, which would hide every upstream gradient.
        let last = params.convs.last_mut().unwrap();
        *last = ConvParams::xavier(last.in_channels, last.out_channels, seed);
        for c in &mut params.convs {
            c.bias.iter_mut().for_each(|b| *b = 0.05);
        }
        for p in &mut params.pde {
            for ch in 0..p.channels {
                p.set_diffusion(ch, 0.1, 0.15);
            }
        }
        let x = image(Shape::new(1, 3, 4, 4), 100 + seed);
        let report = grad_check(
            &graph,
            &params,
            &cfg.context(Discretization::new(2, 0.5)),
            &[x],
            &ProbeLoss::Weighted(probe.clone()),
            GradCheckConfig::new(1e-6, 1e-5),
        )
        .unwrap();
        if report.near_kink {
            continue;
        }
        assert!(report.passed(), "seed {seed}\n{report}");
        checked = true;
        break;
    }
    assert!(checked, "every sample point sat on a relu kink");
}
