//! Canonical Huffman decode tables.
//!
//! Codes of up to [`LUT_BITS`] bits resolve with a single table lookup on the
//! next bits of the stream; longer codes fall back to the `maxcode` walk of
//! the baseline decoding procedure.

use crate::error::{Error, Result};
use crate::parser::HuffmanSpec;

pub const LUT_BITS: u32 = 9;

#[derive(Debug, Clone)]
pub struct HuffmanTable {
    /// `(length << 8) | symbol`, zero when the prefix needs the slow path.
    lut: Box<[u16; 1 << LUT_BITS]>,
    /// Largest code of each length, -1 when there are none. Index = length.
    maxcode: [i32; 17],
    mincode: [i32; 17],
    valptr: [usize; 17],
    symbols: Vec<u8>,
    codes: Vec<(u16, u8, u8)>,
}

pub fn build_huffman_table(spec: &HuffmanSpec) -> Result<HuffmanTable> {
    HuffmanTable::build(spec)
}

impl HuffmanTable {
    pub fn build(spec: &HuffmanSpec) -> Result<Self> {
        let total: usize = spec.counts.iter().map(|&c| c as usize).sum();
        if total != spec.symbols.len() || total > 256 {
            return Err(Error::InvalidTable(format!(
                "{} symbols for {} codes",
                spec.symbols.len(),
                total
            )));
        }

        let mut lut = Box::new([0u16; 1 << LUT_BITS]);
        let mut maxcode = [-1i32; 17];
        let mut mincode = [0i32; 17];
        let mut valptr = [0usize; 17];
        let mut codes = Vec::with_capacity(total);

        let mut code: u32 = 0;
        let mut k = 0usize;
        for len in 1..=16u32 {
            let count = spec.counts[len as usize - 1] as u32;
            if count > 0 {
                valptr[len as usize] = k;
                mincode[len as usize] = code as i32;
            }
            for _ in 0..count {
                if code >= 1 << len {
                    return Err(Error::InvalidTable(format!("code space overflows at length {len}")));
                }
                let symbol = spec.symbols[k];
                codes.push((code as u16, len as u8, symbol));
                if len <= LUT_BITS {
                    let shift = LUT_BITS - len;
                    let base = (code << shift) as usize;
                    for slot in &mut lut[base..base + (1 << shift)] {
                        *slot = ((len as u16) << 8) | symbol as u16;
                    }
                }
                code += 1;
                k += 1;
            }
            if count > 0 {
                maxcode[len as usize] = code as i32 - 1;
            }
            code <<= 1;
        }

        Ok(HuffmanTable { lut, maxcode, mincode, valptr, symbols: spec.symbols.clone(), codes })
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `(code, length, symbol)` triples in canonical order.
    pub fn codes(&self) -> &[(u16, u8, u8)] {
        &self.codes
    }

    /// Symbol for an exact `(code, length)` pair.
    pub fn lookup(&self, code: u16, len: u8) -> Option<u8> {
        if len == 0 || len > 16 {
            return None;
        }
        let l = len as usize;
        let code = code as i32;
        if self.maxcode[l] < 0 || code < self.mincode[l] || code > self.maxcode[l] {
            return None;
        }
        Some(self.symbols[self.valptr[l] + (code - self.mincode[l]) as usize])
    }

    /// Decodes the code at the top of a 16-bit window. Returns the symbol and
    /// the number of bits it occupies.
    #[inline]
    pub fn decode_window(&self, window: u16) -> Option<(u8, u32)> {
        let e = self.lut[(window >> (16 - LUT_BITS)) as usize];
        if e != 0 {
            return Some(((e & 0xFF) as u8, (e >> 8) as u32));
        }
        self.decode_slow(window)
    }

    #[cold]
    fn decode_slow(&self, window: u16) -> Option<(u8, u32)> {
        for len in (LUT_BITS + 1)..=16 {
            let code = (window >> (16 - len)) as i32;
            if code <= self.maxcode[len as usize] {
                let idx = self.valptr[len as usize] + (code - self.mincode[len as usize]) as usize;
                return Some((self.symbols[idx], len));
            }
        }
        None
    }
}
