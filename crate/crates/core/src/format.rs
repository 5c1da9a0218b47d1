//! Compressed bitstream and weights-file containers.
//!
//! Bitstream (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "C3DB"
//!      4     1  version = 1
//!      5     4  width   (original, before padding)
//!      9     4  height  (original, before padding)
//!     13     8  model hash (FNV-1a 64 of the weights file bytes)
//!     21     4  z_len
//!     25     4  y_len
//!     29  z_len z payload
//!      .  y_len y payload
//! ```
//!
//! Weights file:
//!
//! ```text
//! "C3DW", version u8, config_len u32, config text (key=value lines),
//! tensor_count u32, then per tensor:
//!     name_len u16, name, rank u8, dims u32 × rank, data f32 × prod(dims)
//! ```
//!
//! FNV-1a 64 uses offset basis 0xcbf29ce484222325 and prime 0x100000001b3.

use std::hash::Hasher;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ToyModelWeights};
use crate::tensor::Tensor;

pub const BITSTREAM_MAGIC: [u8; 4] = *b"C3DB";
pub const BITSTREAM_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 29;
pub const WEIGHTS_MAGIC: [u8; 4] = *b"C3DW";
pub const WEIGHTS_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub width: u32,
    pub height: u32,
    pub model_hash: u64,
    pub z_len: u32,
    pub y_len: u32,
}

impl BitstreamHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&BITSTREAM_MAGIC);
        out[4] = BITSTREAM_VERSION;
        out[5..9].copy_from_slice(&self.width.to_le_bytes());
        out[9..13].copy_from_slice(&self.height.to_le_bytes());
        out[13..21].copy_from_slice(&self.model_hash.to_le_bytes());
        out[21..25].copy_from_slice(&self.z_len.to_le_bytes());
        out[25..29].copy_from_slice(&self.y_len.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r.take(4, "magic")?;
        if magic != BITSTREAM_MAGIC {
            return Err(Error::BadMagic {
                expected: BITSTREAM_MAGIC,
                found: magic.to_vec(),
            });
        }
        let version = r.u8("version")?;
        if version != BITSTREAM_VERSION {
            return Err(Error::BadVersion {
                expected: BITSTREAM_VERSION,
                found: version,
            });
        }
        let h = Self {
            width: r.u32("width")?,
            height: r.u32("height")?,
            model_hash: r.u64("model hash")?,
            z_len: r.u32("z_len")?,
            y_len: r.u32("y_len")?,
        };
        if h.width == 0 || h.height == 0 {
            return Err(Error::Malformed {
                what: "bitstream header",
                detail: format!("image size {}x{} must be at least 1x1", h.width, h.height),
            });
        }
        Ok(h)
    }
}

pub fn write_bitstream(width: u32, height: u32, model_hash: u64, z: &[u8], y: &[u8]) -> Result<Vec<u8>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "image size {width}x{height} must be at least 1x1"
        )));
    }
    let len32 = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} payload too large")))
    };
    let header = BitstreamHeader {
        width,
        height,
        model_hash,
        z_len: len32(z.len(), "z")?,
        y_len: len32(y.len(), "y")?,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + z.len() + y.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(z);
    out.extend_from_slice(y);
    Ok(out)
}

/// Splits a bitstream into header and the two payloads. Trailing bytes are rejected.
pub fn read_bitstream(bytes: &[u8]) -> Result<(BitstreamHeader, &[u8], &[u8])> {
    let header = BitstreamHeader::parse(bytes)?;
    let mut r = Reader::new(bytes);
    r.pos = HEADER_LEN;
    let z = r.take(header.z_len as usize, "z payload")?;
    let y = r.take(header.y_len as usize, "y payload")?;
    if r.remaining() != 0 {
        return Err(Error::Malformed {
            what: "bitstream",
            detail: format!("{} trailing bytes", r.remaining()),
        });
    }
    Ok((header, z, y))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn write_weights(weights: &ToyModelWeights) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.push(WEIGHTS_VERSION);
    let text = weights.config().to_text();
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(weights.num_tensors() as u32).to_le_bytes());
    for (name, t) in weights.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_weights(bytes: &[u8]) -> Result<ToyModelWeights> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != WEIGHTS_MAGIC {
        return Err(Error::BadMagic {
            expected: WEIGHTS_MAGIC,
            found: magic.to_vec(),
        });
    }
    let version = r.u8("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::BadVersion {
            expected: WEIGHTS_VERSION,
            found: version,
        });
    }
    let cfg_len = r.u32("config length")? as usize;
    let text = std::str::from_utf8(r.take(cfg_len, "config text")?).map_err(|e| Error::Malformed {
        what: "weights config",
        detail: e.to_string(),
    })?;
    let config = ModelConfig::parse(text)?;
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|e| Error::Malformed {
                what: "tensor name",
                detail: e.to_string(),
            })?
            .to_string();
        let rank = r.u8("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor dims")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::TensorMismatch {
                name: name.clone(),
                detail: format!("shape {shape:?} overflows"),
            })?;
        let raw = r.take(n, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::TensorMismatch {
            name: name.clone(),
            detail: e.to_string(),
        })?;
        tensors.push((name, t));
    }
    if r.remaining() != 0 {
        return Err(Error::Malformed {
            what: "weights file",
            detail: format!("{} trailing bytes", r.remaining()),
        });
    }
    ToyModelWeights::from_tensors(config, tensors)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::LengthOverrun {
                what,
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().unwrap())
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        self.array(what).map(u16::from_le_bytes)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        self.array(what).map(u32::from_le_bytes)
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        self.array(what).map(u64::from_le_bytes)
    }
}
