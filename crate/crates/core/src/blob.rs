//! Header + blob container shared by parameter files and checkpoints.
//!
//! Layout: one line of compact JSON terminated by `\n`, followed by the
//! payload as little-endian IEEE-754 `f64` values. The header must carry a
//! `scalars` field equal to the number of values that follow.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Real;

pub fn encode<H: Serialize>(header: &H, values: &[Real]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    out.reserve(values.len() * 8);
    for &v in values {
        out.extend_from_slice(&(v as f64).to_le_bytes());
    }
    Ok(out)
}

/// Split a container into its header and payload. The header is returned as
/// raw JSON so callers can check the version before decoding the rest.
pub fn decode<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<Real>)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Corrupt("missing header terminator".into()))?;
    let header_value: serde_json::Value = serde_json::from_slice(&bytes[..newline])?;
    let scalars = header_value
        .get("scalars")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Corrupt("header lacks `scalars`".into()))? as usize;
    let payload = &bytes[newline + 1..];
    if payload.len() != scalars * 8 {
        return Err(Error::Corrupt(format!(
            "payload is {} bytes, header declares {} scalars ({} bytes)",
            payload.len(),
            scalars,
            scalars * 8
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()) as Real)
        .collect();
    let header = serde_json::from_value(header_value)?;
    Ok((header, values))
}

/// Version field of a container header, read without decoding anything else.
pub fn peek_version(bytes: &[u8]) -> Result<u32> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Corrupt("missing header terminator".into()))?;
    let v: serde_json::Value = serde_json::from_slice(&bytes[..end])?;
    v.get("version")
        .and_then(|v| v.as_u64())
        .map(|v| v as u32)
        .ok_or_else(|| Error::Corrupt("header lacks `version`".into()))
}

/// Write-temp-then-rename so a crash never leaves a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
