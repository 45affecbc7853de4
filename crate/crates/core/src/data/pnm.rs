//! Binary 8-bit PGM (`P5`) and PPM (`P6`).

use std::path::Path;

use crate::blob;
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Real, Shape};

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::ImageFormat {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| format_err(start, format!("{what} out of range")))
    }
}

/// Decode a P5 (1 channel) or P6 (3 channel) image into a `1 x C x H x W` map
/// with values `q / 255`.
pub fn decode_pnm(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(format_err(0, "missing P5/P6 magic"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => {
            return Err(Error::Unsupported(format!(
                "netpbm variant P{} (only binary P5/P6)",
                other as char
            )))
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let max_at = cur.pos;
    let maxval = cur.number("maximum value")?;
    if width == 0 || height == 0 {
        return Err(format_err(max_at, format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::Unsupported(format!("maximum value {maxval} (only 255)")));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(format_err(cur.pos, "expected one whitespace byte before the raster"));
    }
    let start = cur.pos + 1;
    let need = width * height * channels;
    let have = bytes.len() - start;
    if have < need {
        return Err(format_err(
            bytes.len(),
            format!("raster truncated: {have} of {need} bytes present"),
        ));
    }
    let raster = &bytes[start..start + need];
    let mut out = FeatureMap::zeros(Shape::new(1, channels, height, width));
    for c in 0..channels {
        let plane = out.plane_mut(0, c);
        for (p, v) in plane.iter_mut().enumerate() {
            *v = raster[p * channels + c] as Real / 255.0;
        }
    }
    Ok(out)
}

/// Round half up to the nearest of 0..=255.
pub fn quantize(v: Real) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Snap every value to the 8-bit grid used by the file format.
pub fn quantized(map: &FeatureMap) -> FeatureMap {
    map.map(|v| quantize(v) as Real / 255.0)
}

pub fn encode_pnm(image: &FeatureMap) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.batch != 1 {
        return Err(Error::Unsupported(format!("writing a batch of {} images to one file", s.batch)));
    }
    let magic = match s.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Unsupported(format!("{c}-channel image"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", s.width, s.height).into_bytes();
    let pixels = s.height * s.width;
    out.reserve(pixels * s.channels);
    for p in 0..pixels {
        for c in 0..s.channels {
            out.push(quantize(image.plane(0, c)[p]));
        }
    }
    Ok(out)
}

pub fn read_image(path: &Path) -> Result<FeatureMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

pub fn write_image(path: &Path, image: &FeatureMap) -> Result<()> {
    blob::write_atomic(path, &encode_pnm(image)?)
}
