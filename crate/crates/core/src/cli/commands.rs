use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::*;
use crate::autograd::{pde_layer_check, GradCheckConfig, PdeCheckCase};
use crate::blob;
use crate::data::{dataset_from_images, generate_dataset, load_sharp_directory, Dataset, Split, SynthConfig};
use crate::error::Result;
use crate::metrics::macs::{format_gmacs, pde_layer_macs, MacCounter};
use crate::net::{load_checkpoint, Model, NetConfig};
use crate::pde::{self, Discretization, PdeLayerParams, VelocityMode};
use crate::tensor::{FeatureMap, Real, Shape};
use crate::train::{
    ablation_config, ablation_row, direct_config, evaluate, progressive_config, train_with, AblationAxis,
    AblationReport, ArmResult, RunLog, StabilityReport, TrainConfig, TrainOptions,
};

pub(super) fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Bench(a) => bench(a),
        Command::Ablate(a) => ablate(a),
        Command::Stability(a) => stability(a),
    }
}

fn output_dir(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("pdeflow-out"), PathBuf::from);
        root.join(command)
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `run.json`: the command and its full effective configuration.
fn write_run_manifest(dir: &Path, command: &str, settings: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "format": RUN_MANIFEST_FORMAT,
        "version": RUN_MANIFEST_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "settings": settings,
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    blob::write_atomic(&dir.join("run.json"), format!("{text}\n").as_bytes())
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    blob::write_atomic(path, &bytes)
}

/// `S` or `HxW`.
fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("invalid size `{s}` (expected S or HxW)"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?)),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            Ok((v, v))
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid {what} `{}` in `{s}`", v.trim())))
        })
        .collect()
}

fn synth(a: SynthArgs) -> Result<Outcome> {
    let (height, width) = parse_size(&a.size)?;
    let cfg = SynthConfig {
        train: a.count,
        val: a.val.unwrap_or(a.count / 8),
        test: a.test.unwrap_or(a.count / 8),
        height,
        width,
        length_min: a.blur_len_min,
        length_max: a.blur_len_max,
        noise_min: 0.0,
        noise_max: a.noise_sigma,
        boundary: a.boundary.parse()?,
        seed: a.seed,
    };
    let dataset = match &a.source {
        Some(dir) => dataset_from_images(&cfg, load_sharp_directory(dir, height, width)?)?,
        None => generate_dataset(&cfg)?,
    };
    let out = output_dir(a.out, "synth");
    let manifest = dataset.write(&out)?;
    println!(
        "wrote {} pairs ({} train / {} val / {} test, {height}x{width}) to {}",
        manifest.pairs.len(),
        dataset.split(Split::Train).len(),
        dataset.split(Split::Val).len(),
        dataset.split(Split::Test).len(),
        out.display()
    );
    Ok(Outcome::Success)
}

/// Config file, then the shortcut flags, then `--set` overrides. The network
/// size always follows the dataset.
fn training_config(flags: &TrainingFlags, dataset: &Dataset) -> Result<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = &flags.schedule {
        cfg.apply("schedule", s)?;
    }
    if let Some(n) = flags.pde_layers {
        cfg.net.pde_layers = n;
    }
    if let Some(e) = flags.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(id) = &flags.run_id {
        cfg.run_id = id.clone();
    }
    for kv in &flags.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.apply(k, v)?;
    }
    cfg.net.height = dataset.config.height;
    cfg.net.width = dataset.config.width;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct MacRow {
    k: usize,
    conv_macs: u64,
    pde_macs: u64,
    other_macs: u64,
    total_macs: u64,
    conv_gmacs: String,
    pde_gmacs: String,
    pde_share: f64,
}

impl MacRow {
    fn new(k: usize, m: &MacCounter) -> Self {
        Self {
            k,
            conv_macs: m.conv(),
            pde_macs: m.pde(),
            other_macs: m.other(),
            total_macs: m.total(),
            conv_gmacs: format_gmacs(m.conv()),
            pde_gmacs: format_gmacs(m.pde()),
            pde_share: m.pde_share(),
        }
    }
}

fn train(a: TrainArgs) -> Result<Outcome> {
    let dataset = Dataset::load(&a.data)?;
    let cfg = training_config(&a.flags, &dataset)?;
    let out = output_dir(a.out, "train");
    create_dir(&out)?;
    write_run_manifest(
        &out,
        "train",
        json!({
            "data": a.data,
            "resume": a.resume,
            "stop_after": a.stop_after,
            "config": to_json(&cfg)?,
        }),
    )?;
    blob::write_atomic(&out.join("config.txt"), cfg.to_text().as_bytes())?;

    let resume = a.resume.as_deref().map(load_checkpoint).transpose()?;
    let log_path = out.join("run_log.csv");
    // A resumed run continues the log already in the output directory.
    let earlier = match &resume {
        Some(ck) if log_path.exists() => {
            let mut log = RunLog::read_csv(&log_path)?;
            log.rows.retain(|r| r.epoch < ck.epoch);
            Some(log)
        }
        _ => None,
    };
    let model = Model::new(cfg.net, cfg.seed)?;
    let outcome = train_with(
        &model,
        &dataset,
        &cfg,
        TrainOptions {
            checkpoint_dir: Some(out.join("checkpoints")),
            resume,
            stop_after_epoch: a.stop_after,
            ..Default::default()
        },
    )?;
    match earlier {
        Some(mut log) => {
            log.extend(outcome.log.clone())?;
            log.write_csv(&log_path)?;
        }
        None => outcome.log.write_csv(&log_path)?,
    }
    write_csv_rows(&out.join("epochs.csv"), &outcome.epochs)?;
    let disc = outcome.checkpoint.discretization;
    let macs = MacRow::new(disc.k, &cfg.net.mac_model(disc.k));
    write_csv_rows(&out.join("macs.csv"), std::slice::from_ref(&macs))?;

    for e in &outcome.epochs {
        let val = e.val_psnr.map_or("-".into(), |v| format!("{v:.3} dB"));
        println!("epoch {:>3}  K={} dt={:.4}  loss {:.5}  val PSNR {val}", e.epoch, e.k, e.delta_t, e.mean_loss);
    }
    println!(
        "status: {}  steps: {}  max grad norm: {:.4e}",
        outcome.log.status,
        outcome.log.rows.len(),
        outcome.log.max_grad_norm()
    );
    println!(
        "per-image GMACs at K={}: conv {} + PDE {} (PDE share {:.2}%)",
        disc.k,
        macs.conv_gmacs,
        macs.pde_gmacs,
        100.0 * macs.pde_share
    );
    println!("outputs in {}", out.display());
    Ok(Outcome::Success)
}

fn eval(a: EvalArgs) -> Result<Outcome> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let dataset = Dataset::load(&a.data)?;
    let (h, w) = (dataset.config.height, dataset.config.width);
    NetConfig {
        height: h,
        width: w,
        ..ck.config
    }
    .validate()?;
    if (h, w) != (ck.config.height, ck.config.width) {
        return Err(Error::Config(format!(
            "checkpoint was trained on {}x{} images, dataset is {h}x{w}",
            ck.config.height, ck.config.width
        )));
    }
    let split: Split = a.split.parse()?;
    let disc = match a.k {
        Some(k) => Discretization::new(k, ck.discretization.total_time() / k as Real),
        None => ck.discretization,
    };
    let csv_path = a.out.unwrap_or_else(|| output_dir(None, "eval").join("metrics.csv"));
    let dir = csv_path.parent().map(Path::to_path_buf).unwrap_or_default();
    create_dir(&dir)?;
    let images = if a.no_images {
        None
    } else {
        Some(a.images.unwrap_or_else(|| dir.join("images")))
    };
    let model = Model::with_params(ck.config, ck.params)?;
    let report = evaluate(&model, &dataset, split, disc, images.as_deref())?;
    report.write_csv(&csv_path)?;
    write_run_manifest(
        &dir,
        "eval",
        json!({
            "checkpoint": a.checkpoint,
            "data": a.data,
            "split": split.name(),
            "k": disc.k,
            "delta_t": disc.delta_t,
            "ssim": report.ssim_mode.label(),
            "metrics": csv_path,
            "images": images,
        }),
    )?;
    println!(
        "{} {} images at K={}: PSNR {:.3} dB (blurred {:.3}), SSIM {:.4} (blurred {:.4}) [{}]",
        report.rows.len(),
        split.name(),
        disc.k,
        report.mean_restored_psnr(),
        report.mean_blurred_psnr(),
        report.mean_restored_ssim(),
        report.mean_blurred_ssim(),
        report.ssim_mode.label()
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct GradcheckRow {
    k: usize,
    seed: u64,
    tensor: String,
    checked: usize,
    worst_rel_error: Real,
    worst_abs_error: Real,
    worst_entry: String,
    passed: bool,
}

fn gradcheck(a: GradcheckArgs) -> Result<Outcome> {
    let ks: Vec<usize> = parse_list(&a.k, "K")?;
    let (height, width) = parse_size(&a.size)?;
    let velocity_mode: VelocityMode = a.velocity_mode.parse()?;
    let boundary = a.boundary.parse()?;
    let cfg = GradCheckConfig::new(a.epsilon, a.tolerance);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &k in &ks {
        for seed in 0..a.seeds {
            let case = PdeCheckCase {
                k,
                channels: a.channels,
                height,
                width,
                velocity_mode,
                boundary,
                seed,
            };
            let report = pde_layer_check(&case, cfg)?;
            println!(
                "K={k} seed={seed}: worst relative error {:.3e} -> {}",
                report.worst_rel_error(),
                if report.passed() { "pass" } else { "FAIL" }
            );
            if !report.passed() {
                failures.push(format!("K={k} seed={seed}"));
                print!("{report}");
            }
            for e in &report.entries {
                rows.push(GradcheckRow {
                    k,
                    seed,
                    tensor: e.name.clone(),
                    checked: e.checked,
                    worst_rel_error: e.worst_rel_error,
                    worst_abs_error: e.worst_abs_error,
                    worst_entry: e.worst_entry.clone(),
                    passed: e.passed,
                });
            }
        }
    }
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        write_csv_rows(&dir.join("gradcheck.csv"), &rows)?;
        write_run_manifest(
            &dir,
            "gradcheck",
            json!({
                "k": ks, "height": height, "width": width, "channels": a.channels, "seeds": a.seeds,
                "tolerance": a.tolerance, "epsilon": a.epsilon,
                "velocity_mode": velocity_mode, "boundary": boundary,
            }),
        )?;
    }
    println!("tolerance {:e} (relative), step {:e}", a.tolerance, a.epsilon);
    if failures.is_empty() {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::VerificationFailed(format!(
            "{} of {} cases above tolerance: {}",
            failures.len(),
            ks.len() as u64 * a.seeds,
            failures.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct BenchRow {
    k: usize,
    height: usize,
    width: usize,
    channels: usize,
    velocity_mode: VelocityMode,
    counted_macs: u64,
    closed_form_macs: u64,
    wall_ms: f64,
}

fn bench(a: BenchArgs) -> Result<Outcome> {
    let ks: Vec<usize> = parse_list(&a.k_list, "K")?;
    let (height, width) = parse_size(&a.size)?;
    let mode: VelocityMode = a.velocity_mode.parse()?;
    let net = NetConfig::default();
    let params = PdeLayerParams::init(a.channels, height, width, mode, 0)?;
    let shape = Shape::new(1, a.channels, height, width);
    let input = FeatureMap::from_vec(
        shape,
        (0..shape.len()).map(|i| ((i * 37) % 101) as Real / 101.0).collect(),
    )?;
    let mut rows = Vec::new();
    let mut net_rows = Vec::new();
    for &k in &ks {
        let disc = Discretization::new(k, 1.0 / k as Real);
        let mut times = Vec::with_capacity(a.repeats.max(1));
        let mut counted = 0;
        for _ in 0..a.repeats.max(1) {
            let mut counter = MacCounter::new();
            let t = Instant::now();
            pde::forward(&input, &params, &disc, net.boundary, &mut counter)?;
            times.push(t.elapsed().as_secs_f64() * 1e3);
            counted = counter.pde();
        }
        times.sort_by(|x, y| x.total_cmp(y));
        rows.push(BenchRow {
            k,
            height,
            width,
            channels: a.channels,
            velocity_mode: mode,
            counted_macs: counted,
            closed_form_macs: pde_layer_macs(shape, k, mode),
            wall_ms: times[times.len() / 2],
        });
        let model = Model::new(net, 0)?;
        let (_, m) = model.predict_counted(&FeatureMap::zeros(net.input_shape(1)), disc)?;
        net_rows.push(MacRow::new(k, &m));
    }

    println!("single PDE layer, {}x{}x{} ({}):", a.channels, height, width, mode.name());
    println!("{:>3} {:>14} {:>14} {:>10}", "K", "MACs", "closed form", "ms");
    for r in &rows {
        println!("{:>3} {:>14} {:>14} {:>10.3}", r.k, r.counted_macs, r.closed_form_macs, r.wall_ms);
    }
    println!("default toy net, one {}x{} image:", net.height, net.width);
    println!("{:>3} {:>12} {:>12} {:>12} {:>10}", "K", "conv MACs", "PDE MACs", "total", "PDE share");
    for r in &net_rows {
        println!(
            "{:>3} {:>12} {:>12} {:>12} {:>9.3}%",
            r.k,
            r.conv_macs,
            r.pde_macs,
            r.total_macs,
            100.0 * r.pde_share
        );
    }
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        write_csv_rows(&dir.join("bench.csv"), &rows)?;
        write_csv_rows(&dir.join("net_macs.csv"), &net_rows)?;
        write_run_manifest(
            &dir,
            "bench",
            json!({
                "k_list": ks, "height": height, "width": width, "channels": a.channels,
                "velocity_mode": mode, "repeats": a.repeats, "net": to_json(&net)?,
            }),
        )?;
    }
    Ok(Outcome::Success)
}

fn ablate(a: AblateArgs) -> Result<Outcome> {
    let axis: AblationAxis = a.axis.parse()?;
    let values: Vec<usize> = parse_list(&a.values, "value")?;
    let dataset = Dataset::load(&a.data)?;
    let base = training_config(&a.flags, &dataset)?;
    let out = output_dir(a.out, "ablate");
    create_dir(&out)?;
    let configs: Vec<TrainConfig> = values
        .iter()
        .map(|&v| ablation_config(&base, axis, v))
        .collect::<Result<_>>()?;
    write_run_manifest(
        &out,
        "ablate",
        json!({
            "data": a.data,
            "axis": axis,
            "values": values,
            "base": to_json(&base)?,
            "runs": to_json(&configs)?,
        }),
    )?;
    let mut rows = Vec::new();
    for (&v, cfg) in values.iter().zip(&configs) {
        let model = Model::new(cfg.net, cfg.seed)?;
        let outcome = train_with(&model, &dataset, cfg, TrainOptions::default())?;
        outcome.log.write_csv(&out.join(format!("{}_log.csv", cfg.run_id)))?;
        let row = ablation_row(axis, v, cfg, &outcome)?;
        println!(
            "{}={v}: {} val PSNR {}",
            a.axis,
            row.status,
            row.val_psnr.map_or("-".into(), |p| format!("{p:.3} dB"))
        );
        rows.push(row);
    }
    let blurred = if dataset.split(Split::Val).is_empty() {
        None
    } else {
        let (b, s) = dataset.full_batch(Split::Val)?;
        Some(crate::metrics::mean_psnr(&b, &s)?)
    };
    let report = AblationReport {
        rows,
        blurred_val_psnr: blurred,
    };
    blob::write_atomic(&out.join("ablation.csv"), &report.to_csv()?)?;
    blob::write_atomic(&out.join("ablation.txt"), report.table().as_bytes())?;
    print!("{}", report.table());
    Ok(Outcome::Success)
}

fn stability(a: StabilityArgs) -> Result<Outcome> {
    let dataset = Dataset::load(&a.data)?;
    let base = training_config(&a.flags, &dataset)?;
    let out = output_dir(a.out, "stability");
    create_dir(&out)?;
    let (direct_cfg, progressive_cfg) = (direct_config(&base), progressive_config(&base));
    write_run_manifest(
        &out,
        "stability",
        json!({
            "data": a.data,
            "direct": to_json(&direct_cfg)?,
            "progressive": to_json(&progressive_cfg)?,
        }),
    )?;
    let run = |label: &str, cfg: &TrainConfig| -> Result<ArmResult> {
        let model = Model::new(cfg.net, cfg.seed)?;
        let outcome = train_with(&model, &dataset, cfg, TrainOptions::default())?;
        println!("{label}: {}", outcome.log.status);
        ArmResult::from_outcome(label, cfg, &outcome)
    };
    let report = StabilityReport::from_arms(run("direct", &direct_cfg)?, run("progressive", &progressive_cfg)?, &dataset)?;
    report.write(&out)?;
    print!("{report}");
    Ok(Outcome::Success)
}
