use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::TrainConfig;
use super::divergence::{detect_divergence, DivergenceCheck};
use super::optim::Optimizer;
use super::runlog::{LogRow, RunLog, RunStatus, STATUS_DIVERGED, STATUS_OK};
use crate::autograd::backward_graph;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::metrics::{grad_norm, mean_psnr, GradNormRecord};
use crate::net::{save_checkpoint, Checkpoint, Model, ModelParams};
use crate::pde::Discretization;
use crate::schedule::PhaseSchedule;
use crate::seed;
use crate::tensor::Real;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

/// Train-split visiting order for one epoch. Depends only on the seed and the
/// epoch, so a resumed run needs no saved RNG state.
pub fn epoch_order(seed: u64, epoch: usize, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed::derive(seed, SHUFFLE_STREAM), epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// Where a step sits in the run, passed to gradient hooks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub epoch: usize,
    pub step: usize,
    pub k: usize,
    pub delta_t: Real,
}

pub type GradHook<'a> = Box<dyn FnMut(&StepInfo, &mut [Real]) + 'a>;

/// Knobs that change how a run is executed but not what it computes.
#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Checkpoints go here: one per phase boundary plus `final.ckpt`.
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from this state instead of the model's parameters.
    pub resume: Option<Checkpoint>,
    /// Stop (status halted) once this many epochs are complete.
    pub stop_after_epoch: Option<usize>,
    /// Called on the flat gradient before the norm is taken.
    pub grad_hook: Option<GradHook<'a>>,
    /// Skip the per-epoch validation pass.
    pub skip_validation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub k: usize,
    pub delta_t: Real,
    pub mean_loss: Real,
    /// Mean PSNR of restored validation images, if validated.
    pub val_psnr: Option<Real>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: RunLog,
    pub epochs: Vec<EpochSummary>,
    pub optimizer: Optimizer,
    /// Checkpoint of the final state (also written to disk when a directory is set).
    pub checkpoint: Checkpoint,
    pub checkpoints_written: Vec<PathBuf>,
    /// Order of the train split in the first epoch this call ran.
    pub first_epoch_order: Vec<usize>,
}

impl TrainOutcome {
    pub fn final_val_psnr(&self) -> Option<Real> {
        self.epochs.iter().rev().find_map(|e| e.val_psnr)
    }
}

/// Mean PSNR of restored images against sharp ones over a split, evaluated
/// in chunks of `chunk` images.
pub fn split_psnr(model: &Model, dataset: &Dataset, split: Split, disc: Discretization, chunk: usize) -> Result<Real> {
    let n = dataset.split(split).len();
    if n == 0 {
        return Err(Error::Config(format!("{} split is empty", split.name())));
    }
    let mut total = 0.0;
    let ids: Vec<usize> = (0..n).collect();
    for c in ids.chunks(chunk.max(1)) {
        let (blurred, sharp) = dataset.batch(split, c)?;
        let restored = model.predict(&blurred, disc)?;
        total += mean_psnr(&restored, &sharp)? * c.len() as Real;
    }
    Ok(total / n as Real)
}

fn flat_grad_record(params: &ModelParams, flat: &[Real], epoch: usize, step: usize) -> GradNormRecord {
    let mut offset = 0;
    let groups: Vec<(String, &[Real])> = params
        .modules()
        .into_iter()
        .map(|(name, len)| {
            let g = &flat[offset..offset + len];
            offset += len;
            (name, g)
        })
        .collect();
    grad_norm(epoch, step, groups)
}

pub fn train(model: &Model, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, dataset, config, TrainOptions::default())
}

/// Runs (or resumes) training. `model.params` are the starting point unless
/// `options.resume` is set.
pub fn train_with(model: &Model, dataset: &Dataset, config: &TrainConfig, mut options: TrainOptions) -> Result<TrainOutcome> {
    if model.config != config.net {
        return Err(Error::Config("model and training config disagree on the network".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let train_len = dataset.split(Split::Train).len();
    if train_len == 0 && config.epochs > 0 {
        return Err(Error::Config("training split is empty".into()));
    }
    let schedule: PhaseSchedule = config.schedule.resolve()?;
    let mut model = model.clone();
    let n = model.params.num_scalars();
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, n);
    let (mut epoch, mut step) = (0, 0);
    if let Some(ck) = options.resume.take() {
        if ck.config != config.net {
            return Err(Error::Config("checkpoint network does not match the training config".into()));
        }
        model.params = ck.params;
        optimizer.restore(&ck.optimizer)?;
        epoch = ck.epoch;
        step = ck.step;
    }
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut log = RunLog::new(config.run_id.clone());
    let mut summaries = Vec::new();
    let mut written = Vec::new();
    let mut first_order = Vec::new();
    let boundaries = schedule.boundaries();
    let last_epoch = options.stop_after_epoch.map_or(config.epochs, |s| s.min(config.epochs));
    let mut disc_done = schedule.phase_for_epoch(epoch.saturating_sub(1)).discretization();

    let checkpoint = |model: &Model, opt: &Optimizer, epoch: usize, step: usize, disc: Discretization| Checkpoint {
        config: model.config,
        seed: config.seed,
        epoch,
        step,
        phase_index: schedule.phase_index(epoch),
        discretization: disc,
        params: model.params.clone(),
        optimizer: opt.state(),
    };

    'epochs: while epoch < last_epoch {
        let phase = schedule.phase_for_epoch(epoch);
        let disc = phase.discretization();
        let order = epoch_order(config.seed, epoch, train_len);
        if first_order.is_empty() {
            first_order = order.clone();
        }
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for ids in order.chunks(config.batch_size) {
            let started = Instant::now();
            let (blurred, sharp) = dataset.batch(Split::Train, ids)?;
            let exec = model.forward(&blurred, disc)?;
            let (loss, dloss) = config.loss.value_and_grad(exec.output(&model.graph), &sharp)?;
            let grads = backward_graph(&model.graph, &model.params, &exec, &dloss)?;
            drop(exec);
            let mut flat = grads.params.to_flat();
            let info = StepInfo {
                epoch,
                step,
                k: disc.k,
                delta_t: disc.delta_t,
            };
            if let Some(hook) = options.grad_hook.as_mut() {
                hook(&info, &mut flat);
            }
            let record = flat_grad_record(&model.params, &flat, epoch, step);
            let check = detect_divergence(&record, loss, config.divergence_threshold);
            let mut row = LogRow {
                run_id: config.run_id.clone(),
                epoch,
                step,
                k: disc.k,
                delta_t: disc.delta_t,
                loss,
                grad_norm: record.global,
                wall_ms: 0.0,
                status: STATUS_OK.into(),
            };
            if let DivergenceCheck::Diverged(reason) = check {
                row.status = STATUS_DIVERGED.into();
                row.wall_ms = started.elapsed().as_secs_f64() as Real * 1e3;
                log.push(row)?;
                log.status = RunStatus::Diverged { epoch, step, reason };
                break 'epochs;
            }
            if let Some(c) = config.grad_clip {
                if record.global > c {
                    let s = c / record.global;
                    flat.iter_mut().for_each(|g| *g *= s);
                }
            }
            let mut p = model.params.to_flat();
            optimizer.step(&mut p, &flat);
            model.params.set_flat(&p)?;
            row.wall_ms = started.elapsed().as_secs_f64() as Real * 1e3;
            log.push(row)?;
            loss_sum += loss;
            batches += 1;
            step += 1;
        }
        let val_psnr = if options.skip_validation || dataset.split(Split::Val).is_empty() {
            None
        } else {
            Some(split_psnr(&model, dataset, Split::Val, disc, config.batch_size)?)
        };
        summaries.push(EpochSummary {
            epoch,
            k: disc.k,
            delta_t: disc.delta_t,
            mean_loss: loss_sum / batches.max(1) as Real,
            val_psnr,
        });
        epoch += 1;
        disc_done = disc;
        if boundaries.contains(&epoch) && epoch < last_epoch {
            if let Some(dir) = &options.checkpoint_dir {
                let path = dir.join(format!("epoch{epoch:04}.ckpt"));
                save_checkpoint(&path, &checkpoint(&model, &optimizer, epoch, step, disc))?;
                written.push(path);
            }
        }
    }

    if log.status.is_completed() && epoch < config.epochs {
        log.status = RunStatus::Halted { epoch };
    }
    let ck = checkpoint(&model, &optimizer, epoch, step, disc_done);
    if let Some(dir) = &options.checkpoint_dir {
        let path = dir.join("final.ckpt");
        save_checkpoint(&path, &ck)?;
        written.push(path);
    }
    Ok(TrainOutcome {
        params: model.params,
        log,
        epochs: summaries,
        optimizer,
        checkpoint: ck,
        checkpoints_written: written,
        first_epoch_order: first_order,
    })
}
