//! Per-step training log, stored as CSV.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};
use crate::tensor::Real;

pub const STATUS_OK: &str = "ok";
pub const STATUS_DIVERGED: &str = "diverged";

/// One optimizer step (or the step that was refused).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub run_id: String,
    pub epoch: usize,
    pub step: usize,
    pub k: usize,
    pub delta_t: Real,
    pub loss: Real,
    pub grad_norm: Real,
    pub wall_ms: Real,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { epoch: usize, step: usize, reason: String },
    /// Stopped on request before the configured epoch count.
    Halted { epoch: usize },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Completed => write!(f, "completed"),
            RunStatus::Diverged { epoch, step, .. } => write!(f, "diverged (epoch {epoch}, step {step})"),
            RunStatus::Halted { epoch } => write!(f, "halted after epoch {epoch}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub run_id: String,
    pub rows: Vec<LogRow>,
    pub status: RunStatus,
}

impl RunLog {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            rows: Vec::new(),
            status: RunStatus::Completed,
        }
    }

    /// Appends a row. Rows must arrive in strictly increasing `(epoch, step)`.
    pub fn push(&mut self, row: LogRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if (row.epoch, row.step) <= (last.epoch, last.step) {
                return Err(Error::Config(format!(
                    "log row (epoch {}, step {}) does not follow (epoch {}, step {})",
                    row.epoch, row.step, last.epoch, last.step
                )));
            }
            if last.status == STATUS_DIVERGED {
                return Err(Error::Config("rows after a divergence record".into()));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Rows with the `wall_ms` column zeroed, for comparing runs.
    pub fn without_timing(&self) -> Vec<LogRow> {
        self.rows
            .iter()
            .map(|r| LogRow {
                wall_ms: 0.0,
                ..r.clone()
            })
            .collect()
    }

    pub fn max_grad_norm(&self) -> Real {
        self.rows.iter().map(|r| r.grad_norm).fold(0.0, Real::max)
    }

    /// Appends another log's rows, e.g. the continuation of a resumed run.
    pub fn extend(&mut self, other: RunLog) -> Result<()> {
        for row in other.rows {
            self.push(row)?;
        }
        self.status = other.status;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(["run_id", "epoch", "step", "k", "delta_t", "loss", "grad_norm", "wall_ms", "status"])
                .map_err(csv_err)?;
        }
        for row in &self.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        blob::write_atomic(path, &self.to_csv()?)
    }

    /// Reads rows back. The terminal status is taken from the last row.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let rows: Vec<LogRow> = r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
        let run_id = rows.first().map(|r| r.run_id.clone()).unwrap_or_default();
        let status = match rows.last() {
            Some(last) if last.status == STATUS_DIVERGED => RunStatus::Diverged {
                epoch: last.epoch,
                step: last.step,
                reason: format!("grad_norm {}", last.grad_norm),
            },
            _ => RunStatus::Completed,
        };
        let mut log = RunLog::new(run_id);
        for row in rows {
            log.push(row)?;
        }
        log.status = status;
        Ok(log)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("run log csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(epoch: usize, step: usize) -> LogRow {
        LogRow {
            run_id: "r".into(),
            epoch,
            step,
            k: 3,
            delta_t: 1.0 / 3.0,
            loss: 0.125,
            grad_norm: 0.5,
            wall_ms: 12.5,
            status: STATUS_OK.into(),
        }
    }

    #[test]
    fn rows_must_increase() {
        let mut log = RunLog::new("r");
        log.push(row(0, 0)).unwrap();
        log.push(row(0, 1)).unwrap();
        assert!(log.push(row(0, 1)).is_err());
        let mut d = row(1, 2);
        d.status = STATUS_DIVERGED.into();
        log.push(d).unwrap();
        assert!(log.push(row(1, 3)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = RunLog::new("r");
        log.push(row(0, 0)).unwrap();
        log.push(row(1, 1)).unwrap();
        let path = dir.path().join("log.csv");
        log.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_id,epoch,step,k,delta_t,loss,grad_norm,wall_ms,status\n"));
        assert_eq!(RunLog::read_csv(&path).unwrap(), log);

        let empty = RunLog::new("e");
        empty.write_csv(&path).unwrap();
        assert_eq!(RunLog::read_csv(&path).unwrap().rows.len(), 0);
    }
}
