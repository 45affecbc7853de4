//! Training configuration and its text form.
//!
//! Grammar, one setting per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors.
//! `schedule.phase = start,k[,dt]` may repeat and builds a custom schedule.
//! Command-line overrides use the same keys.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::loss::Loss;
use super::optim::OptimizerKind;
use crate::error::{Error, Result};
use crate::net::NetConfig;
use crate::schedule::{PhaseSchedule, ScheduleEntry};
use crate::tensor::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// `1 -> 3 -> 5` with boundaries every `10 * scale` epochs.
    Progressive { scale: Real },
    Fixed { k: usize, delta_t: Real },
    Phases { total_time: Real, entries: Vec<ScheduleEntry> },
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<PhaseSchedule> {
        match self {
            ScheduleSpec::Progressive { scale } => PhaseSchedule::progressive(*scale),
            ScheduleSpec::Fixed { k, delta_t } => PhaseSchedule::fixed(*k, *delta_t),
            ScheduleSpec::Phases { total_time, entries } => PhaseSchedule::from_entries(*total_time, entries),
        }
    }

    fn render(&self) -> Vec<(String, String)> {
        match self {
            ScheduleSpec::Progressive { scale } => vec![
                ("schedule".into(), "progressive".into()),
                ("schedule.scale".into(), scale.to_string()),
            ],
            ScheduleSpec::Fixed { k, delta_t } => vec![("schedule".into(), format!("fixed:{k},{delta_t}"))],
            ScheduleSpec::Phases { total_time, entries } => {
                let mut out = vec![("schedule.total_time".into(), total_time.to_string())];
                for e in entries {
                    let v = match e.delta_t {
                        Some(dt) => format!("{},{},{dt}", e.start_epoch, e.k),
                        None => format!("{},{}", e.start_epoch, e.k),
                    };
                    out.push(("schedule.phase".into(), v));
                }
                out
            }
        }
    }
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    /// `progressive` (scale 0.2) or `fixed:K,DT`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "progressive" {
            return Ok(ScheduleSpec::Progressive { scale: DEFAULT_SCALE });
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            let (k, dt) = rest
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("expected fixed:K,DT, got `{s}`")))?;
            return Ok(ScheduleSpec::Fixed {
                k: parse(k.trim(), "schedule K")?,
                delta_t: parse(dt.trim(), "schedule delta_t")?,
            });
        }
        Err(Error::Config(format!("unknown schedule `{s}` (progressive | fixed:K,DT)")))
    }
}

pub const DEFAULT_SCALE: Real = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub run_id: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: Real,
    pub optimizer: OptimizerKind,
    pub loss: Loss,
    pub schedule: ScheduleSpec,
    pub divergence_threshold: Real,
    /// Rescale gradients to at most this norm. Off by default.
    pub grad_clip: Option<Real>,
    pub seed: u64,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            epochs: 12,
            batch_size: 8,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            loss: Loss::default(),
            schedule: ScheduleSpec::Progressive { scale: DEFAULT_SCALE },
            divergence_threshold: super::DEFAULT_DIVERGENCE_THRESHOLD,
            grad_clip: None,
            seed: 0,
            net: NetConfig::default(),
        }
    }
}

fn parse<T: FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Checks the user-facing invariants. `train` itself also accepts zero
    /// epochs and a zero learning rate.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::Config(format!(
                "divergence_threshold must be positive, got {}",
                self.divergence_threshold
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("grad_clip must be positive, got {c}")));
            }
        }
        self.schedule.resolve()?;
        self.net.validate()
    }

    /// Applies one `key = value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "run_id" => self.run_id = value.to_string(),
            "epochs" => self.epochs = parse(value, key)?,
            "batch_size" => self.batch_size = parse(value, key)?,
            "learning_rate" => self.learning_rate = parse(value, key)?,
            "seed" => self.seed = parse(value, key)?,
            "divergence_threshold" => self.divergence_threshold = parse(value, key)?,
            "grad_clip" => {
                self.grad_clip = match value {
                    "off" | "none" => None,
                    v => Some(parse(v, key)?),
                }
            }
            "optimizer" => {
                self.optimizer = match value {
                    "adam" => OptimizerKind::default(),
                    "sgd" => OptimizerKind::Sgd { momentum: 0.9 },
                    other => return Err(Error::Config(format!("unknown optimizer `{other}` (adam | sgd)"))),
                }
            }
            "momentum" => match &mut self.optimizer {
                OptimizerKind::Sgd { momentum } => *momentum = parse(value, key)?,
                OptimizerKind::Adam { .. } => return Err(Error::Config("momentum applies to optimizer = sgd".into())),
            },
            "loss" => {
                let eps = match self.loss {
                    Loss::Charbonnier { eps } => eps,
                    Loss::L1 => super::loss::CHARBONNIER_EPS,
                };
                self.loss = match value.parse()? {
                    Loss::Charbonnier { .. } => Loss::Charbonnier { eps },
                    l => l,
                };
            }
            "charbonnier_eps" => match &mut self.loss {
                Loss::Charbonnier { eps } => *eps = parse(value, key)?,
                Loss::L1 => return Err(Error::Config("charbonnier_eps applies to loss = charbonnier".into())),
            },
            "schedule" => self.schedule = value.parse()?,
            "schedule.scale" => match &mut self.schedule {
                ScheduleSpec::Progressive { scale } => *scale = parse(value, key)?,
                _ => return Err(Error::Config("schedule.scale applies to schedule = progressive".into())),
            },
            "schedule.total_time" => {
                let t = parse(value, key)?;
                match &mut self.schedule {
                    ScheduleSpec::Phases { total_time, .. } => *total_time = t,
                    _ => {
                        self.schedule = ScheduleSpec::Phases {
                            total_time: t,
                            entries: Vec::new(),
                        }
                    }
                }
            }
            "schedule.phase" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(Error::Config(format!("expected start,k[,dt] for schedule.phase, got `{value}`")));
                }
                let entry = ScheduleEntry {
                    start_epoch: parse(parts[0], key)?,
                    k: parse(parts[1], key)?,
                    delta_t: parts.get(2).map(|v| parse(v, key)).transpose()?,
                };
                match &mut self.schedule {
                    ScheduleSpec::Phases { entries, .. } => entries.push(entry),
                    _ => {
                        self.schedule = ScheduleSpec::Phases {
                            total_time: 1.0,
                            entries: vec![entry],
                        }
                    }
                }
            }
            "net.depth" => self.net.depth = parse(value, key)?,
            "net.base_channels" => self.net.base_channels = parse(value, key)?,
            "net.pde_layers" => self.net.pde_layers = parse(value, key)?,
            "net.velocity_mode" => self.net.velocity_mode = value.parse()?,
            "net.boundary" => self.net.boundary = value.parse()?,
            "net.skip_connections" => self.net.skip_connections = parse(value, key)?,
            "net.global_residual" => self.net.global_residual = parse(value, key)?,
            "net.height" => self.net.height = parse(value, key)?,
            "net.width" => self.net.width = parse(value, key)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every setting in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.apply(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Text form accepted by `from_text`.
    pub fn to_text(&self) -> String {
        let mut kv: Vec<(String, String)> = vec![
            ("run_id".into(), self.run_id.clone()),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("divergence_threshold".into(), self.divergence_threshold.to_string()),
            (
                "grad_clip".into(),
                self.grad_clip.map_or("off".to_string(), |c| c.to_string()),
            ),
            ("optimizer".into(), self.optimizer.name().into()),
        ];
        if let OptimizerKind::Sgd { momentum } = self.optimizer {
            kv.push(("momentum".into(), momentum.to_string()));
        }
        kv.push(("loss".into(), self.loss.name().into()));
        if let Loss::Charbonnier { eps } = self.loss {
            kv.push(("charbonnier_eps".into(), eps.to_string()));
        }
        kv.extend(self.schedule.render());
        let n = &self.net;
        kv.extend([
            ("net.depth".into(), n.depth.to_string()),
            ("net.base_channels".into(), n.base_channels.to_string()),
            ("net.pde_layers".into(), n.pde_layers.to_string()),
            ("net.velocity_mode".into(), n.velocity_mode.name().into()),
            ("net.boundary".into(), n.boundary.name().into()),
            ("net.skip_connections".into(), n.skip_connections.to_string()),
            ("net.global_residual".into(), n.global_residual.to_string()),
            ("net.height".into(), n.height.to_string()),
            ("net.width".into(), n.width.to_string()),
        ]);
        kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
