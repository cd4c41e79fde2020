//! Sequential Huffman decoding into a [`CoefficientBuffer`], resumable at
//! MCU-row granularity.

use crate::buffer::{Block, CoefRows, CoefRowsMut, CoefficientBuffer};
use crate::clock::thread_cpu_ns;
use crate::error::{Error, Result};
use crate::huffman::HuffmanTable;
use crate::parser::{ImageGeometry, ParsedJpeg, Subsampling, TableClass, ZIGZAG_TO_NATURAL};

/// Reorders a block from zigzag scan order into natural row-major order.
pub fn dezigzag(zz: &Block) -> Block {
    let mut out = [0i16; 64];
    for (k, &v) in zz.iter().enumerate() {
        out[ZIGZAG_TO_NATURAL[k]] = v;
    }
    out
}

/// Inverse of [`dezigzag`].
pub fn zigzag(natural: &Block) -> Block {
    let mut out = [0i16; 64];
    for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
        out[k] = natural[n];
    }
    out
}

/// Resumable position in the scan.
#[derive(Debug, Clone, Default)]
pub struct EntropyCursor {
    /// Next unread byte of the entropy-coded span.
    pub byte_pos: usize,
    acc: u64,
    bits: u32,
    pad: u32,
    marker: Option<u8>,
    overrun: bool,
    pub dc_pred: [i32; 3],
    pub rows_decoded: usize,
    mcus_to_restart: u32,
    next_rst: u8,
    /// CPU time spent on each decoded MCU row.
    pub row_times_ns: Vec<u64>,
    /// Scan bytes consumed at the end of each decoded MCU row.
    pub row_end_bytes: Vec<usize>,
}

impl EntropyCursor {
    pub fn total_time_ns(&self) -> u64 {
        self.row_times_ns.iter().sum()
    }

    /// Scan bytes consumed so far, excluding look-ahead held in the bit buffer.
    pub fn bytes_consumed(&self) -> usize {
        let real = self.bits.saturating_sub(self.pad) as usize;
        self.byte_pos.saturating_sub(real / 8)
    }
}

struct Bits<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u64,
    bits: u32,
    pad: u32,
    marker: Option<u8>,
    overrun: bool,
}

impl<'a> Bits<'a> {
    #[inline]
    fn fill(&mut self) {
        while self.bits <= 56 {
            let byte = if self.marker.is_some() || self.pos >= self.data.len() {
                self.pad += 8;
                0
            } else {
                let b = self.data[self.pos];
                if b != 0xFF {
                    self.pos += 1;
                    b
                } else {
                    match self.data.get(self.pos + 1) {
                        Some(0x00) => {
                            self.pos += 2;
                            0xFF
                        }
                        Some(0xFF) => {
                            self.pos += 1;
                            continue;
                        }
                        Some(&m) => {
                            self.marker = Some(m);
                            self.pad += 8;
                            0
                        }
                        None => {
                            self.pos += 1;
                            self.pad += 8;
                            0
                        }
                    }
                }
            };
            self.acc |= (byte as u64) << (56 - self.bits);
            self.bits += 8;
        }
    }

    #[inline]
    fn consume(&mut self, n: u32) {
        self.acc <<= n;
        self.bits -= n;
        if self.bits < self.pad {
            self.overrun = true;
            self.pad = self.bits;
        }
    }

    #[inline]
    fn decode(&mut self, table: &HuffmanTable) -> Result<u8> {
        if self.bits < 16 {
            self.fill();
        }
        let (sym, len) = table.decode_window((self.acc >> 48) as u16).ok_or(Error::BadCode)?;
        self.consume(len);
        Ok(sym)
    }

    #[inline]
    fn receive_extend(&mut self, s: u32) -> i32 {
        if s == 0 {
            return 0;
        }
        if self.bits < s {
            self.fill();
        }
        let v = (self.acc >> (64 - s)) as i32;
        self.consume(s);
        if v < 1 << (s - 1) {
            v - (1 << s) + 1
        } else {
            v
        }
    }

    fn align_and_take_restart(&mut self, expected: u8) -> Result<()> {
        self.acc = 0;
        self.bits = 0;
        self.pad = 0;
        let m = match self.marker.take() {
            Some(m) => m,
            None => {
                // Skip to the marker; only byte-alignment padding should remain.
                while self.pos < self.data.len() && self.data[self.pos] != 0xFF {
                    self.pos += 1;
                }
                while self.pos + 1 < self.data.len() && self.data[self.pos + 1] == 0xFF {
                    self.pos += 1;
                }
                *self.data.get(self.pos + 1).ok_or(Error::BitstreamExhausted)?
            }
        };
        if m != 0xD0 + expected {
            return Err(if (0xD0..=0xD7).contains(&m) {
                Error::CorruptSegment(format!("expected RST{expected}, found RST{}", m - 0xD0))
            } else {
                Error::MarkerInScan(m)
            });
        }
        self.pos += 2;
        Ok(())
    }
}

pub struct EntropyDecoder<'p> {
    parsed: &'p ParsedJpeg,
    geometry: ImageGeometry,
    dc: [HuffmanTable; 3],
    ac: [HuffmanTable; 3],
    cursor: EntropyCursor,
}

impl<'p> EntropyDecoder<'p> {
    pub fn new(parsed: &'p ParsedJpeg) -> Result<Self> {
        let table = |class, id| -> Result<HuffmanTable> {
            let spec = parsed
                .huffman_spec(class, id)
                .ok_or_else(|| Error::CorruptSegment(format!("missing huffman table {class:?}{id}")))?;
            HuffmanTable::build(spec)
        };
        let c = &parsed.components;
        Ok(EntropyDecoder {
            parsed,
            geometry: parsed.geometry(),
            dc: [
                table(TableClass::Dc, c[0].dc_table)?,
                table(TableClass::Dc, c[1].dc_table)?,
                table(TableClass::Dc, c[2].dc_table)?,
            ],
            ac: [
                table(TableClass::Ac, c[0].ac_table)?,
                table(TableClass::Ac, c[1].ac_table)?,
                table(TableClass::Ac, c[2].ac_table)?,
            ],
            cursor: EntropyCursor { mcus_to_restart: parsed.restart_interval as u32, ..Default::default() },
        })
    }

    pub fn cursor(&self) -> &EntropyCursor {
        &self.cursor
    }

    pub fn geometry(&self) -> ImageGeometry {
        self.geometry
    }

    pub fn rows_remaining(&self) -> usize {
        self.geometry.mcu_rows - self.cursor.rows_decoded
    }

    /// Decodes the next `n_rows` MCU rows into `out` at their planar positions.
    pub fn decode_rows(&mut self, out: &mut CoefficientBuffer, n_rows: usize) -> Result<()> {
        let start = self.cursor.rows_decoded;
        let (_, mut rest) = out.rows_mut().split_at_row(start);
        self.decode_into(&mut rest, n_rows)
    }

    /// Decodes the next `n_rows` MCU rows into the head of `view`, splits the
    /// finished rows off as a read-only band, and returns the remainder.
    pub fn decode_band<'a>(
        &mut self,
        mut view: CoefRowsMut<'a>,
        n_rows: usize,
    ) -> Result<(CoefRows<'a>, CoefRowsMut<'a>)> {
        self.decode_into(&mut view, n_rows)?;
        let (done, rest) = view.split_at_row(n_rows);
        Ok((done.freeze(), rest))
    }

    /// Writes `n_rows` rows into the first rows of `view`, which must start at
    /// the cursor's next row.
    pub fn decode_into(&mut self, view: &mut CoefRowsMut<'_>, n_rows: usize) -> Result<()> {
        let remaining = self.rows_remaining();
        if n_rows > remaining || n_rows > view.row_count {
            return Err(Error::RowsOutOfRange { requested: n_rows, remaining: remaining.min(view.row_count) });
        }
        if view.first_row != self.cursor.rows_decoded {
            return Err(Error::RowsNotReady { start: view.first_row, end: view.first_row + view.row_count });
        }
        let c = &mut self.cursor;
        let mut bits = Bits {
            data: self.parsed.entropy_data(),
            pos: c.byte_pos,
            acc: c.acc,
            bits: c.bits,
            pad: c.pad,
            marker: c.marker,
            overrun: c.overrun,
        };
        let interval = self.parsed.restart_interval as u32;
        let luma_per_mcu = self.geometry.subsampling.luma_blocks_per_mcu();
        let mcus = self.geometry.mcus_per_row;
        let mut result = Ok(());

        'rows: for r in 0..n_rows {
            let t0 = thread_cpu_ns();
            let global_row = c.rows_decoded;
            for m in 0..mcus {
                if interval > 0 {
                    let first_mcu = global_row == 0 && m == 0;
                    if c.mcus_to_restart == 0 && !first_mcu {
                        if let Err(e) = bits.align_and_take_restart(c.next_rst) {
                            result = Err(e);
                            break 'rows;
                        }
                        c.next_rst = (c.next_rst + 1) & 7;
                        c.dc_pred = [0; 3];
                        c.mcus_to_restart = interval;
                    }
                    c.mcus_to_restart -= 1;
                }
                for k in 0..luma_per_mcu {
                    let blk = &mut view.row_mut(0, r)[m * luma_per_mcu + k];
                    if let Err(e) = decode_block(&mut bits, &self.dc[0], &self.ac[0], &mut c.dc_pred[0], blk) {
                        result = Err(e);
                        break 'rows;
                    }
                }
                for comp in 1..3 {
                    let blk = &mut view.row_mut(comp, r)[m];
                    if let Err(e) =
                        decode_block(&mut bits, &self.dc[comp], &self.ac[comp], &mut c.dc_pred[comp], blk)
                    {
                        result = Err(e);
                        break 'rows;
                    }
                }
                if bits.overrun {
                    result = Err(Error::BitstreamExhausted);
                    break 'rows;
                }
                if let Some(mk) = bits.marker {
                    if !(0xD0..=0xD7).contains(&mk) {
                        result = Err(Error::MarkerInScan(mk));
                        break 'rows;
                    }
                }
            }
            c.rows_decoded += 1;
            c.row_times_ns.push(thread_cpu_ns().saturating_sub(t0));
            let real = bits.bits.saturating_sub(bits.pad) as usize;
            c.row_end_bytes.push(bits.pos.saturating_sub(real / 8));
        }

        c.byte_pos = bits.pos;
        c.acc = bits.acc;
        c.bits = bits.bits;
        c.pad = bits.pad;
        c.marker = bits.marker;
        c.overrun = bits.overrun;
        result
    }
}

#[inline]
fn decode_block(
    bits: &mut Bits<'_>,
    dc: &HuffmanTable,
    ac: &HuffmanTable,
    pred: &mut i32,
    out: &mut Block,
) -> Result<()> {
    *out = [0; 64];
    let s = bits.decode(dc)? as u32;
    if s > 11 {
        return Err(Error::BadCode);
    }
    *pred += bits.receive_extend(s);
    out[0] = *pred as i16;
    let mut k = 1usize;
    while k < 64 {
        let rs = bits.decode(ac)?;
        let (run, size) = ((rs >> 4) as usize, (rs & 0x0F) as u32);
        if size == 0 {
            if run == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += run;
        if k > 63 {
            return Err(Error::BadCode);
        }
        out[ZIGZAG_TO_NATURAL[k]] = bits.receive_extend(size) as i16;
        k += 1;
    }
    Ok(())
}

/// Fully entropy-decodes `parsed` into a fresh buffer.
pub fn decode_all(parsed: &ParsedJpeg) -> Result<(CoefficientBuffer, EntropyCursor)> {
    let mut dec = EntropyDecoder::new(parsed)?;
    let mut out = CoefficientBuffer::new(dec.geometry());
    let n = dec.rows_remaining();
    dec.decode_rows(&mut out, n)?;
    Ok((out, dec.cursor))
}

impl Subsampling {
    /// Blocks per MCU across all three components.
    pub fn blocks_per_mcu(self) -> usize {
        self.luma_blocks_per_mcu() + 2
    }
}
