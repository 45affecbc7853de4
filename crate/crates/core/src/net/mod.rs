//! Small encoder/decoder with a stack of PDE layers at the coarsest scale.
//!
//! Level `l` carries `base_channels * 2^l` channels. Each encoder level is
//! conv-relu-conv-relu, with 2x average pooling between levels. The decoder
//! upsamples, concatenates the matching encoder output, mixes with a conv and
//! refines with a second conv. A last conv maps back to the image channels.

mod checkpoint;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader,
    OptimizerState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};

use crate::autograd::{forward_graph, ConvParams, Execution, Graph, GraphBuilder, ParamSet, PdeContext};
use crate::error::{Error, Result};
use crate::metrics::macs::{conv3x3_macs, pde_layer_macs, MacCategory, MacCounter};
use crate::pde::{Discretization, PdeLayerParams, VelocityMode};
use crate::tensor::{BoundaryMode, FeatureMap, Shape};

pub type ModelParams = ParamSet;

/// Image channels read and written by the network.
pub const IMAGE_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub depth: usize,
    pub base_channels: usize,
    pub pde_layers: usize,
    pub velocity_mode: VelocityMode,
    pub boundary: BoundaryMode,
    pub skip_connections: bool,
    /// Add the network input to the final conv output.
    pub global_residual: bool,
    pub height: usize,
    pub width: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            base_channels: 8,
            pde_layers: 5,
            velocity_mode: VelocityMode::Spatial,
            boundary: BoundaryMode::Replicate,
            skip_connections: true,
            global_residual: true,
            height: 32,
            width: 32,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        let factor = 1usize << self.depth;
        for size in [self.height, self.width] {
            if size == 0 || size % factor != 0 {
                return Err(Error::Indivisible {
                    size,
                    depth: self.depth,
                    factor,
                });
            }
        }
        Ok(())
    }

    pub fn channels_at(&self, level: usize) -> usize {
        self.base_channels << level
    }

    pub fn bottleneck(&self) -> (usize, usize) {
        (self.height >> self.depth, self.width >> self.depth)
    }

    /// `(in, out)` channels of every conv, in parameter order.
    pub fn conv_shapes(&self) -> Vec<(usize, usize)> {
        let mut out = vec![
            (IMAGE_CHANNELS, self.channels_at(0)),
            (self.channels_at(0), self.channels_at(0)),
        ];
        for l in 1..=self.depth {
            out.push((self.channels_at(l - 1), self.channels_at(l)));
            out.push((self.channels_at(l), self.channels_at(l)));
        }
        for l in (0..self.depth).rev() {
            let up = self.channels_at(l + 1);
            let mix_in = if self.skip_connections { up + self.channels_at(l) } else { up };
            out.push((mix_in, self.channels_at(l)));
            out.push((self.channels_at(l), self.channels_at(l)));
        }
        out.push((self.channels_at(0), IMAGE_CHANNELS));
        out
    }

    pub fn param_count(&self) -> usize {
        let conv: usize = self.conv_shapes().iter().map(|&(i, o)| 9 * i * o + o).sum();
        let c = self.channels_at(self.depth);
        let (h, w) = self.bottleneck();
        let field = match self.velocity_mode {
            VelocityMode::Spatial => c * h * w,
            VelocityMode::Uniform => c,
        };
        conv + self.pde_layers * (2 * field + 4 * c)
    }

    /// Closed-form multiply-accumulates for one image at iteration count `k`,
    /// split as the instrumented counter splits them.
    pub fn mac_model(&self, k: usize) -> MacCounter {
        let shapes = self.conv_shapes();
        let at = |level: usize, c: usize| Shape::new(1, c, self.height >> level, self.width >> level);
        let mut levels: Vec<usize> = vec![0, 0];
        for l in 1..=self.depth {
            levels.extend([l, l]);
        }
        for l in (0..self.depth).rev() {
            levels.extend([l, l]);
        }
        levels.push(0);
        let mut m = MacCounter::new();
        for (&(cin, cout), &level) in shapes.iter().zip(&levels) {
            m.add(MacCategory::Conv, conv3x3_macs(at(level, cin), cout));
        }
        for l in 0..self.depth {
            m.add(MacCategory::Other, at(l, self.channels_at(l)).len() as u64);
        }
        let bottleneck = at(self.depth, self.channels_at(self.depth));
        m.add(
            MacCategory::Pde,
            self.pde_layers as u64 * pde_layer_macs(bottleneck, k, self.velocity_mode),
        );
        m
    }

    pub fn input_shape(&self, batch: usize) -> Shape {
        Shape::new(batch, IMAGE_CHANNELS, self.height, self.width)
    }

    pub fn context(&self, disc: Discretization) -> PdeContext {
        PdeContext {
            disc,
            boundary: self.boundary,
        }
    }
}

/// Graph template for `config`. Conv indices follow [`NetConfig::conv_shapes`].
pub fn build_graph(config: &NetConfig) -> Result<Graph> {
    config.validate()?;
    let mut g = GraphBuilder::new();
    let x = g.input(0, IMAGE_CHANNELS);
    let mut conv = 0;
    let mut block = |g: &mut GraphBuilder, from| {
        let a = g.conv(from, conv);
        let a = g.relu(a);
        let b = g.conv(a, conv + 1);
        conv += 2;
        g.relu(b)
    };
    let mut skips = vec![block(&mut g, x)];
    for _ in 1..=config.depth {
        let d = g.downsample(*skips.last().unwrap());
        skips.push(block(&mut g, d));
    }
    let mut h = skips.pop().unwrap();
    for layer in 0..config.pde_layers {
        h = g.pde(h, layer);
    }
    for skip in skips.into_iter().rev() {
        let u = g.upsample(h);
        let m = if config.skip_connections { g.concat(&[u, skip]) } else { u };
        h = block(&mut g, m);
    }
    let mut y = g.conv(h, conv);
    if config.global_residual {
        y = g.add(y, x);
    }
    g.finish(y)
}

/// Xavier convs and PDE layers drawn from independent streams of `seed`.
/// With a global residual the final conv starts at zero.
/// Conv draws do not depend on `pde_layers`.
pub fn init_params(config: &NetConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let shapes = config.conv_shapes();
    let mut convs: Vec<ConvParams> = shapes
        .iter()
        .enumerate()
        .map(|(i, &(cin, cout))| ConvParams::xavier(cin, cout, crate::seed::derive(seed, i as u64)))
        .collect();
    if config.global_residual {
        // The residual net starts as the identity map.
        let &(cin, cout) = shapes.last().expect("at least one conv");
        *convs.last_mut().unwrap() = ConvParams::zeros(cin, cout);
    }
    let c = config.channels_at(config.depth);
    let (h, w) = config.bottleneck();
    let pde = (0..config.pde_layers)
        .map(|j| PdeLayerParams::init(c, h, w, config.velocity_mode, crate::seed::derive(seed, 1_000_000 + j as u64)))
        .collect::<Result<_>>()?;
    Ok(ParamSet { convs, pde })
}

pub fn build(config: &NetConfig, seed: u64) -> Result<(Graph, ModelParams)> {
    Ok((build_graph(config)?, init_params(config, seed)?))
}

/// A graph together with its configuration, ready to evaluate.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: NetConfig,
    pub graph: Graph,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let (graph, params) = build(&config, seed)?;
        Ok(Self { config, graph, params })
    }

    pub fn with_params(config: NetConfig, params: ModelParams) -> Result<Self> {
        let expected = init_params(&config, 0)?;
        if expected.num_scalars() != params.num_scalars() || expected.segments() != params.segments() {
            return Err(Error::Config("parameters do not match the network configuration".into()));
        }
        Ok(Self { graph: build_graph(&config)?, config, params })
    }

    fn check_input(&self, image: &FeatureMap) -> Result<()> {
        let s = image.shape();
        let expected = self.config.input_shape(s.batch);
        if s != expected {
            return Err(Error::ShapeMismatch { expected, actual: s });
        }
        Ok(())
    }

    /// Unclamped forward pass with every intermediate cached for backward.
    pub fn forward(&self, image: &FeatureMap, disc: Discretization) -> Result<Execution> {
        self.check_input(image)?;
        forward_graph(&self.graph, &self.params, &self.config.context(disc), std::slice::from_ref(image))
    }

    /// Restored image clamped to `[0, 1]`, plus the multiplies spent.
    pub fn predict_counted(&self, image: &FeatureMap, disc: Discretization) -> Result<(FeatureMap, MacCounter)> {
        let exec = self.forward(image, disc)?;
        let macs = exec.macs;
        Ok((exec.into_output(&self.graph).clamp(0.0, 1.0), macs))
    }

    pub fn predict(&self, image: &FeatureMap, disc: Discretization) -> Result<FeatureMap> {
        Ok(self.predict_counted(image, disc)?.0)
    }

    pub fn pde_node_count(&self) -> usize {
        self.graph.count_op(|op| matches!(op, crate::autograd::Op::Pde { .. }))
    }
}
