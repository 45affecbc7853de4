//! Progressive iteration schedule.
//!
//! Training starts with a single solver iteration and a large time step and
//! moves to more iterations with proportionally smaller steps, so that the
//! integration time `T = K·Δt` seen by every PDE layer never changes.
//! Boundaries are half-open: a phase covers `[start, end)` and a shared
//! boundary epoch belongs to the later phase.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::Discretization;
use crate::tensor::Real;

/// Relative tolerance on `K·Δt = T`; admits a printed `0.333` for `1/3`.
pub const TOTAL_TIME_TOLERANCE: Real = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start_epoch: usize,
    /// Exclusive; `None` for the open-ended last phase.
    pub end_epoch: Option<usize>,
    pub k: usize,
    pub delta_t: Real,
}

impl Phase {
    pub fn covers(&self, epoch: usize) -> bool {
        epoch >= self.start_epoch && self.end_epoch.is_none_or(|end| epoch < end)
    }

    pub fn total_time(&self) -> Real {
        self.k as Real * self.delta_t
    }

    pub fn discretization(&self) -> Discretization {
        Discretization::new(self.k, self.delta_t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    NotStartingAtZero { start: usize },
    Gap { from: usize, to: usize },
    Overlap { phase: usize },
    EmptyRange { phase: usize },
    InvalidPhase { phase: usize, reason: String },
    DecreasingK { phase: usize, prev: usize, k: usize },
    TotalTime { phase: usize, got: Real, expected: Real },
    ClosedLastPhase { end: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Phases are reported 1-based.
        match self {
            Violation::Empty => write!(f, "schedule has no phases"),
            Violation::NotStartingAtZero { start } => {
                write!(f, "coverage gap: epochs 0..{start} are not covered")
            }
            Violation::Gap { from, to } => write!(f, "coverage gap: epochs {from}..{to}"),
            Violation::Overlap { phase } => write!(f, "phase {} overlaps its predecessor", phase + 1),
            Violation::EmptyRange { phase } => write!(f, "phase {} covers no epochs", phase + 1),
            Violation::InvalidPhase { phase, reason } => write!(f, "phase {}: {reason}", phase + 1),
            Violation::DecreasingK { phase, prev, k } => {
                write!(f, "phase {}: K decreases from {prev} to {k}", phase + 1)
            }
            Violation::TotalTime { phase, got, expected } => write!(
                f,
                "phase {} total time {got} != {expected}",
                phase + 1
            ),
            Violation::ClosedLastPhase { end } => {
                write!(f, "last phase ends at epoch {end}; it must be open-ended")
            }
        }
    }
}

/// Every problem with a candidate schedule, not just the first.
pub fn validate_phases(total_time: Real, phases: &[Phase]) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(total_time > 0.0 && total_time.is_finite()) {
        out.push(Violation::InvalidPhase {
            phase: 0,
            reason: format!("total time must be positive, got {total_time}"),
        });
    }
    let Some(first) = phases.first() else {
        out.push(Violation::Empty);
        return out;
    };
    if first.start_epoch != 0 {
        out.push(Violation::NotStartingAtZero {
            start: first.start_epoch,
        });
    }
    for (i, p) in phases.iter().enumerate() {
        if p.k == 0 {
            out.push(Violation::InvalidPhase {
                phase: i,
                reason: "K must be at least 1".into(),
            });
        }
        if !(p.delta_t > 0.0 && p.delta_t.is_finite()) {
            out.push(Violation::InvalidPhase {
                phase: i,
                reason: format!("delta_t must be positive, got {}", p.delta_t),
            });
        }
        if (p.total_time() - total_time).abs() > TOTAL_TIME_TOLERANCE * total_time.abs() {
            out.push(Violation::TotalTime {
                phase: i,
                got: p.total_time(),
                expected: total_time,
            });
        }
        if let Some(end) = p.end_epoch {
            if end <= p.start_epoch {
                out.push(Violation::EmptyRange { phase: i });
            }
        }
        if i > 0 {
            let prev = &phases[i - 1];
            match prev.end_epoch {
                Some(end) if end < p.start_epoch => out.push(Violation::Gap {
                    from: end,
                    to: p.start_epoch,
                }),
                Some(end) if end > p.start_epoch => out.push(Violation::Overlap { phase: i }),
                None => out.push(Violation::Overlap { phase: i }),
                _ => {}
            }
            if p.k < prev.k {
                out.push(Violation::DecreasingK {
                    phase: i,
                    prev: prev.k,
                    k: p.k,
                });
            }
        }
    }
    if let Some(end) = phases.last().and_then(|p| p.end_epoch) {
        out.push(Violation::ClosedLastPhase { end });
    }
    out
}

/// A validated, immutable schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    total_time: Real,
    phases: Vec<Phase>,
}

/// `(start_epoch, K, Δt)` with `Δt` derived as `T/K` when omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start_epoch: usize,
    pub k: usize,
    pub delta_t: Option<Real>,
}

impl PhaseSchedule {
    pub fn new(total_time: Real, phases: Vec<Phase>) -> Result<Self> {
        let violations = validate_phases(total_time, &phases);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Config(format!("invalid schedule: {}", msg.join("; "))));
        }
        Ok(Self { total_time, phases })
    }

    /// Build from start epochs; each phase ends where the next one starts.
    pub fn from_entries(total_time: Real, entries: &[ScheduleEntry]) -> Result<Self> {
        let phases = entries
            .iter()
            .enumerate()
            .map(|(i, e)| Phase {
                start_epoch: e.start_epoch,
                end_epoch: entries.get(i + 1).map(|n| n.start_epoch),
                k: e.k,
                delta_t: e.delta_t.unwrap_or(total_time / e.k.max(1) as Real),
            })
            .collect();
        Self::new(total_time, phases)
    }

    /// `K = 1, Δt = 1` for epochs `[0, 10)`, `K = 3, Δt = 1/3` for `[10, 20)`,
    /// then `K = 5, Δt = 0.2`.
    pub fn default_schedule() -> Self {
        Self::progressive(1.0).expect("default schedule is valid")
    }

    /// The default schedule with its epoch boundaries multiplied by `scale`
    /// (rounded to whole epochs), e.g. `0.2` gives boundaries at 2 and 4.
    pub fn progressive(scale: Real) -> Result<Self> {
        Self::progressive_to(5, scale)
    }

    /// Progressive schedule that stops at `k_max`: the default `1 → 3 → 5`
    /// phases with `K < k_max`, then `k_max` from the next boundary on.
    /// Boundaries are spaced `10·scale` epochs apart.
    pub fn progressive_to(k_max: usize, scale: Real) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        let boundary = |i: usize| -> usize { (10.0 * scale * i as Real).round() as usize };
        let mut ks: Vec<usize> = [1, 3, 5].into_iter().filter(|&k| k < k_max).collect();
        ks.push(k_max);
        let entries: Vec<ScheduleEntry> = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| ScheduleEntry {
                start_epoch: boundary(i),
                k,
                delta_t: None,
            })
            .collect();
        Self::from_entries(1.0, &entries)
    }

    /// One open-ended phase.
    pub fn fixed(k: usize, delta_t: Real) -> Result<Self> {
        Self::new(
            k as Real * delta_t,
            vec![Phase {
                start_epoch: 0,
                end_epoch: None,
                k,
                delta_t,
            }],
        )
    }

    pub fn total_time(&self) -> Real {
        self.total_time
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Always empty for a constructed schedule.
    pub fn validate(&self) -> Vec<Violation> {
        validate_phases(self.total_time, &self.phases)
    }

    pub fn phase_for_epoch(&self, epoch: usize) -> &Phase {
        self.phases
            .iter()
            .find(|p| p.covers(epoch))
            .expect("validated schedules cover every epoch")
    }

    pub fn phase_index(&self, epoch: usize) -> usize {
        self.phases
            .iter()
            .position(|p| p.covers(epoch))
            .expect("validated schedules cover every epoch")
    }

    /// Epochs at which a new phase begins (excluding 0).
    pub fn boundaries(&self) -> Vec<usize> {
        self.phases.iter().skip(1).map(|p| p.start_epoch).collect()
    }

    pub fn describe(&self) -> String {
        self.phases
            .iter()
            .map(|p| p.k.to_string())
            .collect::<Vec<_>>()
            .join("->")
    }
}
