//! Direct K=5 training against the progressive 1->3->5 schedule on the same
//! data and seed. Whether the direct arm diverges is reported, not assumed.
//!
//! cargo run --release --example stability_compare -- [epochs]

use pdeflow::data::{generate_dataset, SynthConfig};
use pdeflow::net::NetConfig;
use pdeflow::train::{stability_experiment, TrainConfig};

fn main() -> pdeflow::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let data = generate_dataset(&SynthConfig { train: 128, val: 16, test: 0, height: 16, width: 16, seed: 9, ..SynthConfig::default() })?;
    let net = NetConfig { base_channels: 4, height: 16, width: 16, ..NetConfig::default() };
    let base = TrainConfig { epochs, net, ..TrainConfig::default() };

    let report = stability_experiment(&data, &base)?;
    print!("{report}");
    let ks: Vec<usize> = report.progressive.log.rows.iter().map(|r| r.k).collect();
    let mut changes = vec![ks[0]];
    changes.extend(ks.windows(2).filter(|w| w[0] != w[1]).map(|w| w[1]));
    println!("progressive K sequence in the log: {changes:?}");
    Ok(())
}
