//! The `pdeflow` command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 runtime error. Output directories default to
//! `$PDEFLOW_OUT/<command>` (or `pdeflow-out/<command>`).

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::tensor::Real;

pub const OUTPUT_ROOT_ENV: &str = "PDEFLOW_OUT";
pub const RUN_MANIFEST_FORMAT: &str = "pdeflow-run";
pub const RUN_MANIFEST_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFICATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pdeflow", version, about = "Differentiable advection-diffusion layers for image deblurring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic blurred/sharp dataset.
    Synth(SynthArgs),
    /// Train the toy network.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split and write restored images.
    Eval(EvalArgs),
    /// Check PDE layer gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Multiply-accumulate counts and timings across iteration counts.
    Bench(BenchArgs),
    /// Train one run per value of a single axis.
    Ablate(AblateArgs),
    /// Compare direct K=5 training with the progressive schedule.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training pairs.
    #[arg(long, default_value_t = 512)]
    pub count: usize,
    /// Validation pairs [default: count / 8].
    #[arg(long)]
    pub val: Option<usize>,
    /// Test pairs [default: count / 8].
    #[arg(long)]
    pub test: Option<usize>,
    /// `S` or `HxW`.
    #[arg(long, default_value = "32")]
    pub size: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub blur_len_min: usize,
    #[arg(long, default_value_t = 9)]
    pub blur_len_max: usize,
    /// Noise sigma is drawn uniformly from `[0, noise_sigma)`.
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma: Real,
    #[arg(long, default_value = "replicate")]
    pub boundary: String,
    /// Take sharp images from this directory of PGM/PPM files instead of
    /// generating them.
    #[arg(long)]
    pub source: Option<PathBuf>,
}

/// Settings shared by every command that trains.
#[derive(Debug, Args)]
pub struct TrainingFlags {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `progressive` or `fixed:K,DT`.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub pde_layers: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub run_id: Option<String>,
    /// Any configuration key, e.g. `--set learning_rate=5e-4`. Repeatable;
    /// applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: TrainingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many completed epochs (status `halted`).
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics CSV path [default: <output root>/eval/metrics.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Restored images directory [default: `images` next to the CSV].
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub no_images: bool,
    /// Override the checkpoint's iteration count (Δt becomes T/K).
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Iteration counts, comma separated.
    #[arg(long, default_value = "5")]
    pub k: String,
    #[arg(long, default_value = "8x8")]
    pub size: String,
    #[arg(long, default_value_t = 2)]
    pub channels: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: Real,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: Real,
    #[arg(long, default_value = "spatial")]
    pub velocity_mode: String,
    #[arg(long, default_value = "replicate")]
    pub boundary: String,
    /// Also write the per-tensor results as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "1,3,5,7")]
    pub k_list: String,
    /// Field size for the single-layer rows.
    #[arg(long, default_value = "8x8")]
    pub size: String,
    #[arg(long, default_value_t = 32)]
    pub channels: usize,
    #[arg(long, default_value = "spatial")]
    pub velocity_mode: String,
    /// Timed repetitions per K; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// `k` or `layers`.
    #[arg(long)]
    pub axis: String,
    /// Comma separated values, e.g. `0,1,3,5`.
    #[arg(long)]
    pub values: String,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: TrainingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: TrainingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command finished.
#[derive(Debug)]
pub enum Outcome {
    Success,
    /// The command ran but a check it performs did not pass.
    VerificationFailed(String),
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::execute(cli.command) {
        Ok(Outcome::Success) => EXIT_OK,
        Ok(Outcome::VerificationFailed(msg)) => {
            eprintln!("verification failed: {msg}");
            EXIT_VERIFICATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Rewrites CSV output as whitespace-separated columns for gnuplot: the header
/// becomes a `#` comment, empty fields become `NaN` and text containing
/// spaces is quoted.
pub fn gnuplot_columns(csv_text: &[u8]) -> crate::Result<String> {
    let mut reader = csv::Reader::from_reader(csv_text);
    let field = |f: &str| -> String {
        if f.is_empty() {
            "NaN".into()
        } else if f.contains(char::is_whitespace) {
            format!("\"{}\"", f.replace('"', "'"))
        } else {
            f.to_string()
        }
    };
    let csv_err = |e: csv::Error| Error::Corrupt(format!("CSV input: {e}"));
    let header = reader.headers().map_err(csv_err)?;
    let mut out = format!("# {}\n", header.iter().collect::<Vec<_>>().join(" "));
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        out.push_str(&record.iter().map(field).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn run() -> ExitCode {
    ExitCode::from(run_from(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gnuplot_layout() {
        let text = gnuplot_columns(b"k,name,psnr\n1,a b,25.5\n3,c,\n").unwrap();
        assert_eq!(text, "# k name psnr\n1 \"a b\" 25.5\n3 c NaN\n");
        assert!(gnuplot_columns(b"a,b\n1\n").is_err());
    }
}
