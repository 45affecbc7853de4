//! Checkpoints: network configuration, training position and optimizer
//! moments in one header + blob file.
//!
//! Blob order: model parameters (flat), then each optimizer moment buffer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_params, ModelParams, NetConfig};
use crate::blob;
use crate::error::{Error, Result};
use crate::pde::Discretization;
use crate::tensor::Real;

pub const CHECKPOINT_FORMAT: &str = "pdeflow-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Optimizer step count and moment buffers, each as long as the parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub kind: String,
    pub step: u64,
    pub moments: Vec<Vec<Real>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetConfig,
    pub seed: u64,
    /// Epochs fully completed.
    pub epoch: usize,
    /// Optimizer steps taken.
    pub step: usize,
    /// Index of the schedule phase active for the next epoch.
    pub phase_index: usize,
    /// PDE discretization of the last completed epoch; what inference uses.
    pub discretization: Discretization,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub config: NetConfig,
    pub seed: u64,
    pub epoch: usize,
    pub step: usize,
    pub phase_index: usize,
    pub k: usize,
    pub delta_t: Real,
    pub param_scalars: usize,
    pub optimizer_kind: String,
    pub optimizer_step: u64,
    pub moment_buffers: usize,
    pub scalars: usize,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let n = ck.params.num_scalars();
    let mut values = ck.params.to_flat();
    for m in &ck.optimizer.moments {
        if m.len() != n {
            return Err(Error::Corrupt(format!("moment buffer has {} entries, parameters {n}", m.len())));
        }
        values.extend_from_slice(m);
    }
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: ck.config,
        seed: ck.seed,
        epoch: ck.epoch,
        step: ck.step,
        phase_index: ck.phase_index,
        k: ck.discretization.k,
        delta_t: ck.discretization.delta_t,
        param_scalars: n,
        optimizer_kind: ck.optimizer.kind.clone(),
        optimizer_step: ck.optimizer.step,
        moment_buffers: ck.optimizer.moments.len(),
        scalars: values.len(),
    };
    blob::encode(&header, &values)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let version = blob::peek_version(bytes)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (h, values): (CheckpointHeader, Vec<Real>) = blob::decode(bytes)?;
    if h.format != CHECKPOINT_FORMAT {
        return Err(Error::Unsupported(format!("format `{}`", h.format)));
    }
    let mut params = init_params(&h.config, 0)?;
    let n = params.num_scalars();
    if n != h.param_scalars || values.len() != n * (1 + h.moment_buffers) {
        return Err(Error::Corrupt(format!(
            "checkpoint holds {} scalars; configuration implies {n} parameters and {} moment buffers",
            values.len(),
            h.moment_buffers
        )));
    }
    params.set_flat(&values[..n])?;
    let moments = values[n..].chunks_exact(n.max(1)).map(|c| c.to_vec()).collect();
    Ok(Checkpoint {
        config: h.config,
        seed: h.seed,
        epoch: h.epoch,
        step: h.step,
        phase_index: h.phase_index,
        discretization: Discretization::new(h.k, h.delta_t),
        params,
        optimizer: OptimizerState {
            kind: h.optimizer_kind,
            step: h.optimizer_step,
            moments,
        },
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    blob::write_atomic(path, &encode_checkpoint(ck)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetConfig {
        NetConfig {
            depth: 1,
            base_channels: 2,
            pde_layers: 2,
            height: 4,
            width: 4,
            ..NetConfig::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = small();
        let params = init_params(&cfg, 9).unwrap();
        let n = params.num_scalars();
        let ck = Checkpoint {
            config: cfg,
            seed: 9,
            epoch: 3,
            step: 17,
            phase_index: 1,
            discretization: Discretization::new(3, 1.0 / 3.0),
            params,
            optimizer: OptimizerState {
                kind: "adam".into(),
                step: 17,
                moments: vec![(0..n).map(|i| i as Real * 1e-3).collect(), vec![Real::MIN_POSITIVE; n]],
            },
        };
        let back = decode_checkpoint(&encode_checkpoint(&ck).unwrap()).unwrap();
        assert_eq!(back, ck);
        let a: Vec<u64> = ck.params.to_flat().iter().map(|v| v.to_bits() as u64).collect();
        let b: Vec<u64> = back.params.to_flat().iter().map(|v| v.to_bits() as u64).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn version_and_truncation_are_detected() {
        let cfg = small();
        let ck = Checkpoint {
            config: cfg,
            seed: 1,
            epoch: 0,
            step: 0,
            phase_index: 0,
            discretization: Discretization::new(1, 1.0),
            params: init_params(&cfg, 1).unwrap(),
            optimizer: OptimizerState::default(),
        };
        let bytes = encode_checkpoint(&ck).unwrap();
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 8]), Err(Error::Corrupt(_))));
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let mut header = String::from_utf8(bytes[..nl].to_vec()).unwrap();
        header = header.replace("\"version\":1", "\"version\":7");
        let mut changed = header.into_bytes();
        changed.extend_from_slice(&bytes[nl..]);
        assert!(matches!(decode_checkpoint(&changed), Err(Error::Version { found: 7, expected: 1 })));
    }
}
