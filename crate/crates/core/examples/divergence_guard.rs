//! Amplifies the gradient from one step onward and shows the run stopping at
//! that step with the parameters from just before it.
//!
//! cargo run --release --example divergence_guard

use pdeflow::data::{generate_dataset, SynthConfig};
use pdeflow::net::{Model, NetConfig};
use pdeflow::train::{train_with, StepInfo, TrainConfig, TrainOptions};
use pdeflow::Real;

fn main() -> pdeflow::Result<()> {
    let data = generate_dataset(&SynthConfig { train: 32, val: 8, test: 0, height: 16, width: 16, seed: 5, ..SynthConfig::default() })?;
    let net = NetConfig { base_channels: 4, height: 16, width: 16, ..NetConfig::default() };
    let cfg = TrainConfig { epochs: 4, net, ..TrainConfig::default() };
    let model = Model::new(net, cfg.seed)?;

    let hook = |info: &StepInfo, grad: &mut [Real]| {
        if info.step >= 6 {
            grad.iter_mut().for_each(|g| *g *= 1e6);
        }
    };
    let out = train_with(&model, &data, &cfg, TrainOptions { grad_hook: Some(Box::new(hook)), ..TrainOptions::default() })?;

    println!("{:>5} {:>4} {:>2} {:>12} {:>12}  status", "epoch", "step", "K", "loss", "grad norm");
    for r in &out.log.rows {
        println!("{:>5} {:>4} {:>2} {:>12.6} {:>12.4e}  {}", r.epoch, r.step, r.k, r.loss, r.grad_norm, r.status);
    }
    println!("run status: {}", out.log.status);
    println!("optimizer steps applied: {}", out.optimizer.steps_taken());
    Ok(())
}
