//! Shows the progressive iteration schedule at a few epoch scales and what
//! validation reports for a broken one.
//!
//! cargo run --release --example schedule_phases

use pdeflow::schedule::{validate_phases, Phase, PhaseSchedule};

fn main() -> pdeflow::Result<()> {
    for scale in [1.0, 0.5, 0.2] {
        let s = PhaseSchedule::progressive(scale)?;
        println!("scale {scale}: {}  boundaries {:?}", s.describe(), s.boundaries());
    }

    let s = PhaseSchedule::progressive(0.2)?;
    println!("\nepoch  K  dt       K*dt");
    for epoch in 0..7 {
        let p = s.phase_for_epoch(epoch);
        println!("{epoch:>5}  {}  {:.5}  {:.6}", p.k, p.delta_t, p.total_time());
    }

    let broken = [
        Phase { start_epoch: 0, end_epoch: Some(3), k: 3, delta_t: 1.0 / 3.0 },
        Phase { start_epoch: 4, end_epoch: Some(6), k: 1, delta_t: 0.9 },
        Phase { start_epoch: 6, end_epoch: Some(8), k: 5, delta_t: 0.2 },
    ];
    println!("\nbroken schedule:");
    for v in validate_phases(1.0, &broken) {
        println!("  {v}");
    }
    Ok(())
}
