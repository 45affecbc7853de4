//! Trains four epochs straight through, then again as two halves joined by a
//! checkpoint on disk, and confirms both runs end with identical parameters.
//!
//! cargo run --release --example checkpoint_resume

use pdeflow::data::{generate_dataset, SynthConfig};
use pdeflow::net::{load_checkpoint, save_checkpoint, Model, NetConfig};
use pdeflow::train::{train, train_with, TrainConfig, TrainOptions};

fn main() -> pdeflow::Result<()> {
    let data = generate_dataset(&SynthConfig { train: 32, val: 8, test: 0, height: 16, width: 16, seed: 5, ..SynthConfig::default() })?;
    let net = NetConfig { base_channels: 4, height: 16, width: 16, ..NetConfig::default() };
    let cfg = TrainConfig { epochs: 4, net, ..TrainConfig::default() };
    let model = Model::new(net, cfg.seed)?;

    let full = train(&model, &data, &cfg)?;

    let first = train_with(&model, &data, &cfg, TrainOptions { stop_after_epoch: Some(2), ..TrainOptions::default() })?;
    println!("first half: {}", first.log.status);
    let path = std::env::temp_dir().join("pdeflow-example-half.ckpt");
    save_checkpoint(&path, &first.checkpoint)?;
    let ck = load_checkpoint(&path)?;
    println!(
        "checkpoint: epoch {}, step {}, next phase {}, optimizer step {}",
        ck.epoch, ck.step, ck.phase_index, ck.optimizer.step
    );
    let second = train_with(&model, &data, &cfg, TrainOptions { resume: Some(ck), ..TrainOptions::default() })?;

    println!("second half: {}", second.log.status);
    println!("parameters identical to uninterrupted run: {}", second.params == full.params);
    println!(
        "final val PSNR {:.4} dB vs {:.4} dB",
        second.final_val_psnr().unwrap_or(pdeflow::Real::NAN),
        full.final_val_psnr().unwrap_or(pdeflow::Real::NAN)
    );
    Ok(())
}
