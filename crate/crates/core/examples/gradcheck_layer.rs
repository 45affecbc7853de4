//! Checks the PDE layer's reverse sweep against central finite differences
//! on random 8x8 layers for a few iteration counts.
//!
//! cargo run --release --example gradcheck_layer

use pdeflow::autograd::{pde_layer_check, GradCheckConfig, PdeCheckCase};
use pdeflow::pde::VelocityMode;
use pdeflow::BoundaryMode;

fn main() -> pdeflow::Result<()> {
    let cfg = GradCheckConfig::new(1e-6, 1e-5);
    for k in [1, 3, 5] {
        for mode in [VelocityMode::Uniform, VelocityMode::Spatial] {
            let case = PdeCheckCase {
                k,
                channels: 2,
                height: 8,
                width: 8,
                velocity_mode: mode,
                boundary: BoundaryMode::Replicate,
                seed: 100 + k as u64,
            };
            let report = pde_layer_check(&case, cfg)?;
            println!(
                "K={k} {:<8} {}  worst rel error {:.2e}",
                mode.name(),
                if report.passed() { "pass" } else { "FAIL" },
                report.worst_rel_error()
            );
        }
    }
    let case = PdeCheckCase {
        k: 5,
        channels: 2,
        height: 8,
        width: 8,
        velocity_mode: VelocityMode::Spatial,
        boundary: BoundaryMode::Periodic,
        seed: 7,
    };
    println!("\nper-tensor detail, periodic boundary:\n{}", pde_layer_check(&case, cfg)?);
    Ok(())
}
