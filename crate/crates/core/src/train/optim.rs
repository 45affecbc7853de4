use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::OptimizerState;
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: Real, beta2: Real, eps: Real },
    Sgd { momentum: Real },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adam { .. } => "adam",
            OptimizerKind::Sgd { .. } => "sgd",
        }
    }

    fn buffers(&self) -> usize {
        match self {
            OptimizerKind::Adam { .. } => 2,
            OptimizerKind::Sgd { .. } => 1,
        }
    }
}

/// First-order optimizer over a flat parameter vector. Moments live here and
/// persist across schedule phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: Real,
    step: u64,
    moments: Vec<Vec<Real>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: Real, num_params: usize) -> Self {
        Self {
            kind,
            learning_rate,
            step: 0,
            moments: vec![vec![0.0; num_params]; kind.buffers()],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn state(&self) -> OptimizerState {
        OptimizerState {
            kind: self.kind.name().into(),
            step: self.step,
            moments: self.moments.clone(),
        }
    }

    pub fn restore(&mut self, state: &OptimizerState) -> Result<()> {
        if state.kind != self.kind.name()
            || state.moments.len() != self.moments.len()
            || state.moments.iter().zip(&self.moments).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Config(format!(
                "checkpoint optimizer `{}` with {} buffers does not match `{}`",
                state.kind,
                state.moments.len(),
                self.kind.name()
            )));
        }
        self.step = state.step;
        self.moments = state.moments.clone();
        Ok(())
    }

    /// One update `params -= lr * direction(grads)`.
    pub fn step(&mut self, params: &mut [Real], grads: &[Real]) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let (m, rest) = self.moments.split_at_mut(1);
                let (m, v) = (&mut m[0], &mut rest[0]);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::Sgd { momentum } => {
                let vel = &mut self.moments[0];
                for i in 0..params.len() {
                    vel[i] = momentum * vel[i] + grads[i];
                    params[i] -= lr * vel[i];
                }
            }
        }
    }
}
