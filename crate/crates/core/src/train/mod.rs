//! Training loop, run logs, configuration and the experiments built on them.

mod config;
mod divergence;
mod eval;
mod experiments;
mod loss;
mod optim;
mod runlog;
mod trainer;

pub use config::{ScheduleSpec, TrainConfig, DEFAULT_SCALE};
pub use divergence::{detect_divergence, DivergenceCheck, DEFAULT_DIVERGENCE_THRESHOLD};
pub use eval::{evaluate, EvalReport, EvalRow};
pub use experiments::{
    ablate, ablation_config, ablation_row, direct_config, final_val_psnr, progressive_config, stability_experiment,
    AblationAxis, AblationReport, AblationRow, ArmResult, StabilityReport,
};
pub use loss::{Loss, CHARBONNIER_EPS};
pub use optim::{Optimizer, OptimizerKind};
pub use runlog::{LogRow, RunLog, RunStatus, STATUS_DIVERGED, STATUS_OK};
pub use trainer::{epoch_order, split_psnr, train, train_with, EpochSummary, GradHook, StepInfo, TrainOptions, TrainOutcome};
