use serde::Serialize;

use crate::metrics::GradNormRecord;
use crate::tensor::Real;

pub const DEFAULT_DIVERGENCE_THRESHOLD: Real = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DivergenceCheck {
    Ok,
    Diverged(String),
}

impl DivergenceCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, DivergenceCheck::Ok)
    }
}

/// Diverged iff the loss or any gradient is non-finite, or the global norm
/// is strictly above `threshold`.
pub fn detect_divergence(record: &GradNormRecord, loss: Real, threshold: Real) -> DivergenceCheck {
    if !loss.is_finite() {
        return DivergenceCheck::Diverged("non-finite loss".into());
    }
    if !record.finite || !record.global.is_finite() {
        return DivergenceCheck::Diverged("non-finite gradient".into());
    }
    if record.global > threshold {
        return DivergenceCheck::Diverged(format!("grad_norm {} > {}", record.global, threshold));
    }
    DivergenceCheck::Ok
}
