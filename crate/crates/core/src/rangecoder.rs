//! Byte-oriented range coder over 16-bit cumulative frequency tables.
//!
//! The scheme is the carry-less-output variant used by LZMA:
//!
//! ```text
//! state      low: u64 (33 significant bits), range: u32, cache: u8, cache_size
//! init       low = 0, range = 0xFFFF_FFFF, cache = 0, cache_size = 1
//! encode     r = range >> 16
//!            low += r * cum_lo
//!            range = r * width
//!            while range < 2^24 { range <<= 8; shift_low() }
//! shift_low  if low < 0xFF00_0000 or low >= 2^32:
//!                carry = low >> 32
//!                emit cache + carry, then (cache_size - 1) bytes of 0xFF + carry
//!                cache = (low >> 24) & 0xFF; cache_size = 0
//!            cache_size += 1
//!            low = (low << 8) & 0xFFFF_FFFF
//! flush      shift_low() five times
//! ```
//!
//! The first emitted byte is always zero, so it is not stored. The decoder
//! mirrors the encoder with `code = stream - low` held in 32 bits:
//!
//! ```text
//! init       range = 0xFFFF_FFFF, code = first 4 bytes big-endian
//! decode     r = range >> 16; t = code / r  (t >= 2^16 means corruption)
//!            symbol = table.lookup(t)
//!            code -= r * cum_lo; range = r * width
//!            while range < 2^24 { range <<= 8; code = (code << 8) | next_byte }
//! ```
//!
//! The flush writes every significant bit of `low`, so a well-formed stream is
//! consumed exactly and leaves `code == 0`; [`RangeDecoder::finish`] checks both.

use crate::error::{Error, Result};
use crate::gmm::{CdfTable, CDF_BITS, CDF_TOTAL};

const TOP: u32 = 1 << 24;

#[derive(Clone, Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
    first_dropped: bool,
    symbols: usize,
    #[cfg(test)]
    long_carries: usize,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
            first_dropped: false,
            symbols: 0,
            #[cfg(test)]
            long_carries: 0,
        }
    }

    pub fn encode(&mut self, symbol: i32, table: &CdfTable) -> Result<()> {
        let (lo, width) = table.interval(symbol)?;
        self.encode_interval(lo, width);
        self.symbols += 1;
        Ok(())
    }

    fn encode_interval(&mut self, lo: u32, width: u32) {
        debug_assert!(width > 0 && lo + width <= CDF_TOTAL);
        let r = self.range >> CDF_BITS;
        self.low += u64::from(r) * u64::from(lo);
        self.range = r * width;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn emit(&mut self, byte: u8) {
        if self.first_dropped {
            self.out.push(byte);
        } else {
            debug_assert_eq!(byte, 0);
            self.first_dropped = true;
        }
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low >= 1 << 32 {
            let carry = (self.low >> 32) as u8;
            #[cfg(test)]
            if carry > 0 && self.cache_size > 1 {
                self.long_carries += 1;
            }
            let mut byte = self.cache;
            loop {
                self.emit(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low << 8) & 0xFFFF_FFFF;
    }

    /// Bytes emitted so far, excluding anything still held in the carry buffer.
    pub fn bytes_so_far(&self) -> usize {
        self.out.len()
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Clone, Debug)]
pub struct RangeDecoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
    symbols: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let mut d = Self {
            bytes,
            pos: 0,
            range: u32::MAX,
            code: 0,
            symbols: 0,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | u32::from(d.next_byte()?);
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self.bytes.get(self.pos).ok_or(Error::StreamExhausted {
            position: self.pos,
            symbol: self.symbols,
        })?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode(&mut self, table: &CdfTable) -> Result<i32> {
        let r = self.range >> CDF_BITS;
        let target = self.code / r;
        if target >= CDF_TOTAL {
            return Err(Error::CorruptStream(format!(
                "target {target} out of range at symbol {} (byte {})",
                self.symbols, self.pos
            )));
        }
        let symbol = table.lookup(target);
        let (lo, width) = table.interval(symbol)?;
        self.code -= r * lo;
        self.range = r * width;
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | u32::from(self.next_byte()?);
        }
        self.symbols += 1;
        Ok(symbol)
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Checks that the stream was consumed exactly and ends on the encoder's final state.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::CorruptStream(format!(
                "{} trailing bytes after {} symbols",
                self.bytes.len() - self.pos,
                self.symbols
            )));
        }
        if self.code != 0 {
            return Err(Error::CorruptStream(format!(
                "final code {:#x} is not zero",
                self.code
            )));
        }
        Ok(())
    }
}

pub fn rc_encode<'t>(symbols: impl IntoIterator<Item = (i32, &'t CdfTable)>) -> Result<Vec<u8>> {
    let mut enc = RangeEncoder::new();
    for (s, t) in symbols {
        enc.encode(s, t)?;
    }
    Ok(enc.finish())
}

/// Decodes `count` symbols; `next_table(i)` supplies the table for symbol `i`
/// and may depend on symbols already decoded.
pub fn rc_decode<F>(bytes: &[u8], mut next_table: F, count: usize) -> Result<Vec<i32>>
where
    F: FnMut(usize, &[i32]) -> Result<CdfTable>,
{
    let mut dec = RangeDecoder::new(bytes)?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let table = next_table(i, &out)?;
        out.push(dec.decode(&table)?);
    }
    dec.finish()?;
    Ok(out)
}
