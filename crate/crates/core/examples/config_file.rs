//! Parses a `key = value` training configuration, applies an override and
//! prints the fully resolved settings.
//!
//! cargo run --release --example config_file

use pdeflow::train::TrainConfig;

const TEXT: &str = "\
# toy run
run_id = demo
epochs = 6
learning_rate = 5e-4
loss = l1
schedule = progressive
schedule.scale = 0.5
net.pde_layers = 3
net.velocity_mode = uniform
";

fn main() -> pdeflow::Result<()> {
    let mut cfg = TrainConfig::from_text(TEXT)?;
    cfg.apply("grad_clip", "10")?;
    cfg.validate()?;
    let schedule = cfg.schedule.resolve()?;
    println!("schedule {} with boundaries {:?}", schedule.describe(), schedule.boundaries());
    println!("--- resolved ---\n{}", cfg.to_text());

    match TrainConfig::from_text("epochs = 3\nnet.depth = lots\n") {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
