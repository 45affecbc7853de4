//! PSNR and SSIM of one procedural image blurred with growing motion lengths.
//!
//! cargo run --release --example image_metrics

use pdeflow::data::{blur, make_motion_kernel, procedural_image, quantized};
use pdeflow::metrics::{psnr, ssim, SsimMode};
use pdeflow::BoundaryMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdeflow::Result<()> {
    let sharp = quantized(&procedural_image(64, 64, &mut ChaCha8Rng::seed_from_u64(5)));
    println!("length   PSNR dB   SSIM gauss11   SSIM block8");
    for length in [1, 3, 5, 7, 9, 13] {
        let k = make_motion_kernel(length, 0.6);
        let blurred = quantized(&blur(&sharp, &k, BoundaryMode::Replicate, 0.0, 0));
        println!(
            "{length:>6}  {:>8.3}   {:>12.4}   {:>11.4}",
            psnr(&blurred, &sharp)?,
            ssim(&blurred, &sharp, SsimMode::Gaussian11)?,
            ssim(&blurred, &sharp, SsimMode::Block8)?
        );
    }
    Ok(())
}
