//! Parameter files: one JSON header line, then the flat `f64` blob in the
//! order documented on [`PdeLayerParams::to_flat`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{PdeLayerParams, VelocityMode};
use crate::blob;
use crate::error::{Error, Result};

pub const PARAMS_FORMAT: &str = "pdeflow-pde-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamsHeader {
    pub format: String,
    pub version: u32,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub velocity_mode: VelocityMode,
    pub scalars: usize,
}

pub fn encode_params(params: &PdeLayerParams) -> Result<Vec<u8>> {
    let header = ParamsHeader {
        format: PARAMS_FORMAT.to_string(),
        version: PARAMS_VERSION,
        channels: params.channels,
        height: params.height,
        width: params.width,
        velocity_mode: params.velocity_mode,
        scalars: params.num_scalars(),
    };
    blob::encode(&header, &params.to_flat())
}

pub fn decode_params(bytes: &[u8]) -> Result<PdeLayerParams> {
    let version = blob::peek_version(bytes)?;
    if version != PARAMS_VERSION {
        return Err(Error::Version {
            found: version,
            expected: PARAMS_VERSION,
        });
    }
    let (header, values): (ParamsHeader, _) = blob::decode(bytes)?;
    if header.format != PARAMS_FORMAT {
        return Err(Error::Unsupported(format!("format `{}`", header.format)));
    }
    let mut params = PdeLayerParams::zeros(
        header.channels,
        header.height,
        header.width,
        header.velocity_mode,
    );
    params.set_flat(&values)?;
    Ok(params)
}

pub fn save_params(path: &Path, params: &PdeLayerParams) -> Result<()> {
    blob::write_atomic(path, &encode_params(params)?)
}

pub fn load_params(path: &Path) -> Result<PdeLayerParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes)
}
