//! Trains the toy net on a small synthetic set and reports validation PSNR.
//!
//! cargo run --release --example train_toy -- [epochs] [train_count] [batch] [lr]

use pdeflow::data::{generate_dataset, SynthConfig};
use pdeflow::net::Model;
use pdeflow::train::{train, TrainConfig};

fn main() -> pdeflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let train_count = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128);
    let data = generate_dataset(&SynthConfig { train: train_count, val: 64, test: 0, seed: 7, ..SynthConfig::default() })?;
    let mut cfg = TrainConfig { epochs, ..TrainConfig::default() };
    if let Some(b) = args.get(3).and_then(|s| s.parse().ok()) {
        cfg.batch_size = b;
    }
    if let Some(lr) = args.get(4).and_then(|s| s.parse().ok()) {
        cfg.learning_rate = lr;
    }
    let model = Model::new(cfg.net, cfg.seed)?;
    let t = std::time::Instant::now();
    let out = train(&model, &data, &cfg)?;
    for e in &out.epochs {
        println!("epoch {:>2}  K={}  loss {:.5}  val PSNR {:.3} dB", e.epoch, e.k, e.mean_loss, e.val_psnr.unwrap_or(pdeflow::Real::NAN));
    }
    println!("status: {}  ({:.1} s)", out.log.status, t.elapsed().as_secs_f64());
    Ok(())
}
