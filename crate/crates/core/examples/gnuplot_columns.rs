//! Converts a CSV written by any command into gnuplot column layout.
//!
//! cargo run --release --example gnuplot_columns -- pdeflow-out/train/run_log.csv > run_log.dat
//! gnuplot -e "plot 'run_log.dat' using 3:6 with lines"

fn main() -> pdeflow::Result<()> {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: gnuplot_columns FILE.csv");
        std::process::exit(2);
    };
    let bytes = std::fs::read(&path).map_err(|e| pdeflow::Error::Unsupported(format!("{path}: {e}")))?;
    print!("{}", pdeflow::cli::gnuplot_columns(&bytes)?);
    Ok(())
}
