//! Binary PPM (P6, maxval 255) reading and writing.
//!
//! Images come in as `[3, H, W]` tensors in `[0, 1]` (v / 255). Writing rounds
//! half away from zero and clamps to 0..=255.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn err(msg: impl Into<String>) -> Error {
    Error::Ppm(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(err(format!("expected {what} at byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| err(format!("{what} out of range")))
    }
}

/// Parse a P6 image into a `[3, H, W]` tensor with values v / 255.
pub fn parse_ppm(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(err("not a binary PPM (missing P6 magic)"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(err(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(err(format!("unsupported maxval {maxval}, only 255 is accepted")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(err("missing whitespace after maxval")),
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| err("image dimensions overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < n {
        return Err(err(format!(
            "truncated raster: need {n} bytes, have {}",
            raster.len()
        )));
    }
    if raster.len() > n {
        return Err(err(format!("{} trailing bytes after raster", raster.len() - n)));
    }
    let plane = width * height;
    let img = Tensor::from_fn(&[3, height, width], |i| {
        let c = i / plane;
        let p = i % plane;
        raster[p * 3 + c] as f32 / 255.0
    });
    Ok(img)
}

/// Map a value in [0, 1] to a byte: round half away from zero, clamp.
pub fn to_byte(v: f32) -> u8 {
    let s = (v * 255.0).round();
    if s.is_nan() {
        0
    } else {
        s.clamp(0.0, 255.0) as u8
    }
}

/// Serialize a `[3, H, W]` tensor as P6.
pub fn encode_ppm(img: &Tensor<f32>) -> Result<Vec<u8>> {
    let (c, h, w) = img.chw()?;
    if c != 3 {
        return Err(err(format!("expected 3 channels, got {c}")));
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                out.push(to_byte(img.at3(ch, y, x)));
            }
        }
    }
    Ok(out)
}

pub fn read_ppm(path: &Path) -> Result<Tensor<f32>> {
    let bytes = std::fs::read(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    parse_ppm(&bytes)
}

pub fn write_ppm(path: &Path, img: &Tensor<f32>) -> Result<()> {
    let bytes = encode_ppm(img)?;
    let mut f = std::fs::File::create(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    f.write_all(&bytes)
        .map_err(|e| err(format!("{}: {e}", path.display())))
}
