//! Splits the toy network's multiply-accumulate budget into convolution and
//! PDE shares for each iteration count, from the closed-form model and from
//! an instrumented forward pass.
//!
//! cargo run --release --example mac_budget

use pdeflow::net::{Model, NetConfig};
use pdeflow::pde::Discretization;
use pdeflow::{FeatureMap, Real};

fn main() -> pdeflow::Result<()> {
    let cfg = NetConfig::default();
    let model = Model::new(cfg, 0)?;
    let image = FeatureMap::filled(cfg.input_shape(1), 0.5);
    println!("{} parameters, PDE layers at {:?}", cfg.param_count(), cfg.bottleneck());
    println!(" K      conv       pde     other  pde share  counted==model");
    for k in [1, 3, 5, 7] {
        let model_count = cfg.mac_model(k);
        let (_, counted) = model.predict_counted(&image, Discretization::new(k, 1.0 / k as Real))?;
        println!(
            "{k:>2} {:>9} {:>9} {:>9}  {:>8.3}%  {}",
            model_count.conv(),
            model_count.pde(),
            model_count.other(),
            100.0 * model_count.pde_share(),
            counted == model_count
        );
    }
    let step = cfg.mac_model(2).pde() - cfg.mac_model(1).pde();
    println!("each extra iteration adds {step} PDE MACs per image");
    Ok(())
}
