//! Short ablation over the number of PDE layers at the bottleneck.
//!
//! cargo run --release --example ablation_sweep -- [epochs]

use pdeflow::data::{generate_dataset, SynthConfig};
use pdeflow::net::NetConfig;
use pdeflow::train::{ablate, AblationAxis, TrainConfig};

fn main() -> pdeflow::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let data = generate_dataset(&SynthConfig { train: 128, val: 16, test: 0, height: 16, width: 16, seed: 9, ..SynthConfig::default() })?;
    let net = NetConfig { base_channels: 4, height: 16, width: 16, ..NetConfig::default() };
    let base = TrainConfig { epochs, net, ..TrainConfig::default() };

    let report = ablate(&data, &base, AblationAxis::Layers, &[0, 1, 3, 5])?;
    print!("{}", report.table());
    println!("non-decreasing in layer count: {}", report.is_non_decreasing());
    Ok(())
}
