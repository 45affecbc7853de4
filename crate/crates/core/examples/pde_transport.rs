//! Pushes a single bright column through one PDE layer with a uniform
//! rightward velocity and some diffusion, then prints the profile and its
//! centre of mass for several iteration counts at fixed total time.
//!
//! cargo run --release --example pde_transport

use pdeflow::metrics::MacCounter;
use pdeflow::pde::{self, cfl_diagnostic, Discretization, PdeLayerParams, VelocityMode};
use pdeflow::{BoundaryMode, FeatureMap, Real, Shape};

const WIDTH: usize = 24;

fn profile(map: &FeatureMap) -> Vec<Real> {
    map.plane(0, 0)[..WIDTH].to_vec()
}

fn centre(row: &[Real]) -> Real {
    let mass: Real = row.iter().sum();
    row.iter().enumerate().map(|(i, v)| i as Real * v).sum::<Real>() / mass
}

fn main() -> pdeflow::Result<()> {
    let shape = Shape::new(1, 1, 4, WIDTH);
    let mut input = FeatureMap::zeros(shape);
    for y in 0..4 {
        input.set(0, 0, y, 6, 1.0);
    }

    let mut layer = PdeLayerParams::zeros(1, 4, WIDTH, VelocityMode::Uniform);
    layer.set_uniform_velocity(0, 2.0, 0.0);
    layer.set_diffusion(0, 0.3, 0.3);

    println!("input   centre {:.3}", centre(&profile(&input)));
    for k in [1, 3, 5, 10] {
        let disc = Discretization::new(k, 1.0 / k as Real);
        let mut counter = MacCounter::new();
        let (out, _) = pde::forward(&input, &layer, &disc, BoundaryMode::Periodic, &mut counter)?;
        let row = profile(&out);
        let cfl = cfl_diagnostic(&layer, &disc);
        println!(
            "K={k:<3} centre {:.3}  mass {:.6}  macs {:>6}  cfl {}",
            centre(&row),
            row.iter().sum::<Real>(),
            counter.pde(),
            if cfl.is_clean() { "clean".to_string() } else { cfl.warnings.join("; ") }
        );
        let bars: String = row.iter().map(|v| [' ', '.', ':', '+', '#'][((v * 8.0).clamp(0.0, 4.0)) as usize]).collect();
        println!("        |{bars}|");
    }
    Ok(())
}
