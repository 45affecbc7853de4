//! Trains briefly, then scores the test split per image and writes the
//! blurred, restored and sharp images side by side as PPM files.
//!
//! cargo run --release --example evaluate_restoration -- [epochs] [image_dir]

use pdeflow::data::{generate_dataset, Split, SynthConfig};
use pdeflow::net::Model;
use pdeflow::train::{evaluate, train, TrainConfig};

fn main() -> pdeflow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let image_dir = args.get(2).cloned().unwrap_or_else(|| "pdeflow-out/example-eval".into());

    let data = generate_dataset(&SynthConfig { train: 128, val: 16, test: 8, seed: 21, ..SynthConfig::default() })?;
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let out = train(&Model::new(cfg.net, cfg.seed)?, &data, &cfg)?;
    let model = Model::with_params(cfg.net, out.params)?;

    let report = evaluate(&model, &data, Split::Test, out.checkpoint.discretization, Some(image_dir.as_ref()))?;
    println!("index  blurred dB  restored dB  blurred SSIM  restored SSIM");
    for r in &report.rows {
        println!(
            "{:>5}  {:>10.3}  {:>11.3}  {:>12.4}  {:>13.4}",
            r.index, r.blurred_psnr, r.restored_psnr, r.blurred_ssim, r.restored_ssim
        );
    }
    println!(
        "mean   {:>10.3}  {:>11.3}  {:>12.4}  {:>13.4}   (K={}, SSIM {})",
        report.mean_blurred_psnr(),
        report.mean_restored_psnr(),
        report.mean_blurred_ssim(),
        report.mean_restored_ssim(),
        report.k,
        report.ssim_mode.label()
    );
    println!("images in {image_dir}");
    Ok(())
}
