//! Direct-versus-progressive comparison and single-axis ablations.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::Serialize;

use super::config::{ScheduleSpec, TrainConfig, DEFAULT_SCALE};
use super::runlog::{RunLog, RunStatus};
use super::trainer::{split_psnr, train_with, EpochSummary, TrainOptions, TrainOutcome};
use crate::blob;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::metrics::mean_psnr;
use crate::net::Model;
use crate::schedule::{PhaseSchedule, ScheduleEntry};
use crate::tensor::{FeatureMap, Real};

/// One arm of a comparison.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub label: String,
    pub schedule: String,
    pub config: TrainConfig,
    pub log: RunLog,
    pub epochs: Vec<EpochSummary>,
    pub max_grad_norm: Real,
    /// Validation PSNR at the end of the last completed epoch.
    pub final_val_psnr: Option<Real>,
    pub first_epoch_order: Vec<usize>,
}

impl ArmResult {
    pub fn from_outcome(label: &str, config: &TrainConfig, outcome: &TrainOutcome) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            schedule: config.schedule.resolve()?.describe(),
            config: config.clone(),
            log: outcome.log.clone(),
            epochs: outcome.epochs.clone(),
            max_grad_norm: outcome.log.max_grad_norm(),
            final_val_psnr: outcome.final_val_psnr(),
            first_epoch_order: outcome.first_epoch_order.clone(),
        })
    }

    pub fn status(&self) -> &RunStatus {
        &self.log.status
    }
}

fn run_arm(label: &str, dataset: &Dataset, config: &TrainConfig) -> Result<ArmResult> {
    let model = Model::new(config.net, config.seed)?;
    let outcome = train_with(&model, dataset, config, TrainOptions::default())?;
    ArmResult::from_outcome(label, config, &outcome)
}

fn blurred_val_psnr(dataset: &Dataset) -> Result<Option<Real>> {
    if dataset.split(Split::Val).is_empty() {
        return Ok(None);
    }
    let (b, s) = dataset.full_batch(Split::Val)?;
    Ok(Some(mean_psnr(&b, &s)?))
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub direct: ArmResult,
    pub progressive: ArmResult,
    /// Both arms visited the training set in the same order in epoch 0.
    pub same_first_batch_order: bool,
    pub blurred_val_psnr: Option<Real>,
}

/// The fixed `K = 5, Δt = 0.2` arm for a base config.
pub fn direct_config(base: &TrainConfig) -> TrainConfig {
    TrainConfig {
        run_id: format!("{}-direct", base.run_id),
        schedule: ScheduleSpec::Fixed { k: 5, delta_t: 0.2 },
        ..base.clone()
    }
}

/// The progressive arm: `base.schedule` if it is progressive, otherwise the
/// default scale.
pub fn progressive_config(base: &TrainConfig) -> TrainConfig {
    let schedule = match base.schedule {
        ScheduleSpec::Progressive { .. } => base.schedule.clone(),
        _ => ScheduleSpec::Progressive { scale: DEFAULT_SCALE },
    };
    TrainConfig {
        run_id: format!("{}-progressive", base.run_id),
        schedule,
        ..base.clone()
    }
}

impl StabilityReport {
    /// Builds the report from already finished arms.
    pub fn from_arms(direct: ArmResult, progressive: ArmResult, dataset: &Dataset) -> Result<Self> {
        Ok(Self {
            same_first_batch_order: direct.first_epoch_order == progressive.first_epoch_order,
            direct,
            progressive,
            blurred_val_psnr: blurred_val_psnr(dataset)?,
        })
    }

    pub fn arms(&self) -> [&ArmResult; 2] {
        [&self.direct, &self.progressive]
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct Row<'a> {
            strategy: &'a str,
            schedule: &'a str,
            status: String,
            diverged_epoch: Option<usize>,
            steps: usize,
            max_grad_norm: Real,
            final_val_psnr: Option<Real>,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for arm in self.arms() {
            let diverged_epoch = match arm.status() {
                RunStatus::Diverged { epoch, .. } => Some(*epoch),
                _ => None,
            };
            w.serialize(Row {
                strategy: &arm.label,
                schedule: &arm.schedule,
                status: arm.status().to_string(),
                diverged_epoch,
                steps: arm.log.rows.len(),
                max_grad_norm: arm.max_grad_norm,
                final_val_psnr: arm.final_val_psnr,
            })
            .map_err(|e| Error::Config(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Config(e.to_string()))
    }

    /// `stability.csv`, `stability.txt` and one run log per arm.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        blob::write_atomic(&dir.join("stability.csv"), &self.summary_csv()?)?;
        blob::write_atomic(&dir.join("stability.txt"), self.to_string().as_bytes())?;
        self.direct.log.write_csv(&dir.join("direct_log.csv"))?;
        self.progressive.log.write_csv(&dir.join("progressive_log.csv"))
    }
}

fn opt(v: Option<Real>, digits: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.digits$}"))
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:<10} {:<28} {:>14} {:>14}",
            "strategy", "K", "status", "max grad norm", "val PSNR (dB)"
        )?;
        for arm in self.arms() {
            writeln!(
                f,
                "{:<12} {:<10} {:<28} {:>14.4e} {:>14}",
                arm.label,
                arm.schedule,
                arm.status().to_string(),
                arm.max_grad_norm,
                opt(arm.final_val_psnr, 3)
            )?;
        }
        writeln!(f, "blurred input val PSNR: {} dB", opt(self.blurred_val_psnr, 3))?;
        writeln!(f, "identical epoch-0 batch order: {}", self.same_first_batch_order)?;
        writeln!(f, "optimizer moments carried across phase changes (not reset)")
    }
}

/// Trains both arms from the same seed and data.
pub fn stability_experiment(dataset: &Dataset, base: &TrainConfig) -> Result<StabilityReport> {
    let direct = run_arm("direct", dataset, &direct_config(base))?;
    let progressive = run_arm("progressive", dataset, &progressive_config(base))?;
    StabilityReport::from_arms(direct, progressive, dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    /// Final iteration count; `0` removes the PDE layers.
    K,
    /// Number of PDE layers at the bottleneck.
    Layers,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(AblationAxis::K),
            "layers" => Ok(AblationAxis::Layers),
            other => Err(Error::Config(format!("unknown ablation axis `{other}` (k | layers)"))),
        }
    }
}

/// The base config with one axis changed. Along `K`, the progressive
/// schedule is cut off at the requested value, keeping the base scale.
pub fn ablation_config(base: &TrainConfig, axis: AblationAxis, value: usize) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    cfg.run_id = format!("{}-{}{value}", base.run_id, if axis == AblationAxis::K { "k" } else { "layers" });
    match axis {
        AblationAxis::Layers => cfg.net.pde_layers = value,
        AblationAxis::K if value == 0 => cfg.net.pde_layers = 0,
        AblationAxis::K => {
            let scale = match base.schedule {
                ScheduleSpec::Progressive { scale } => scale,
                _ => DEFAULT_SCALE,
            };
            let s = PhaseSchedule::progressive_to(value, scale)?;
            cfg.schedule = ScheduleSpec::Phases {
                total_time: s.total_time(),
                entries: s
                    .phases()
                    .iter()
                    .map(|p| ScheduleEntry {
                        start_epoch: p.start_epoch,
                        k: p.k,
                        delta_t: Some(p.delta_t),
                    })
                    .collect(),
            };
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: usize,
    pub pde_layers: usize,
    pub schedule: String,
    pub status: String,
    pub val_psnr: Option<Real>,
    pub param_count: usize,
    pub conv_macs: u64,
    pub pde_macs: u64,
    pub total_macs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub blurred_val_psnr: Option<Real>,
}

impl AblationReport {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Config(e.to_string()))
    }

    /// True when validation PSNR never drops as the axis value grows. Runs
    /// without a PSNR (diverged before validating) count as a drop.
    pub fn is_non_decreasing(&self) -> bool {
        let mut rows: Vec<&AblationRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.value);
        rows.windows(2).all(|w| match (w[0].val_psnr, w[1].val_psnr) {
            (Some(a), Some(b)) => b >= a,
            _ => false,
        })
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<7} {:>5} {:>7} {:<10} {:<12} {:>10} {:>8} {:>10}\n",
            "axis", "value", "layers", "schedule", "status", "val PSNR", "params", "PDE MACs"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<7} {:>5} {:>7} {:<10} {:<12} {:>10} {:>8} {:>10}",
                if r.axis == AblationAxis::K { "k" } else { "layers" },
                r.value,
                r.pde_layers,
                r.schedule,
                r.status,
                opt(r.val_psnr, 3),
                r.param_count,
                r.pde_macs
            );
        }
        let _ = writeln!(out, "blurred input val PSNR: {}", opt(self.blurred_val_psnr, 3));
        out
    }
}

/// One row from a finished run of `config`.
pub fn ablation_row(axis: AblationAxis, value: usize, config: &TrainConfig, outcome: &TrainOutcome) -> Result<AblationRow> {
    let schedule = config.schedule.resolve()?;
    let disc = schedule.phase_for_epoch(config.epochs.saturating_sub(1)).discretization();
    let model = Model::with_params(config.net, outcome.params.clone())?;
    let (_, macs) = model.predict_counted(&FeatureMap::zeros(config.net.input_shape(1)), disc)?;
    Ok(AblationRow {
        axis,
        value,
        pde_layers: config.net.pde_layers,
        schedule: if config.net.pde_layers == 0 { "-".into() } else { schedule.describe() },
        status: outcome.log.status.to_string(),
        val_psnr: outcome.final_val_psnr(),
        param_count: config.net.param_count(),
        conv_macs: macs.conv(),
        pde_macs: macs.pde(),
        total_macs: macs.total(),
    })
}

/// Trains one run per value; everything but the axis is shared.
pub fn ablate(dataset: &Dataset, base: &TrainConfig, axis: AblationAxis, values: &[usize]) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let cfg = ablation_config(base, axis, v)?;
        let model = Model::new(cfg.net, cfg.seed)?;
        let outcome = train_with(&model, dataset, &cfg, TrainOptions::default())?;
        rows.push(ablation_row(axis, v, &cfg, &outcome)?);
    }
    Ok(AblationReport {
        rows,
        blurred_val_psnr: blurred_val_psnr(dataset)?,
    })
}

/// Validation PSNR of a model restoring with the last phase of `config`.
pub fn final_val_psnr(model: &Model, dataset: &Dataset, config: &TrainConfig) -> Result<Real> {
    let disc = config
        .schedule
        .resolve()?
        .phase_for_epoch(config.epochs.saturating_sub(1))
        .discretization();
    split_psnr(model, dataset, Split::Val, disc, config.batch_size)
}
