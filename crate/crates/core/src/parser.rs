//! Marker-segment parser for single-scan baseline JPEG streams.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::huffman::HuffmanTable;

const SOI: u8 = 0xD8;
const EOI: u8 = 0xD9;
const SOS: u8 = 0xDA;
const DQT: u8 = 0xDB;
const DHT: u8 = 0xC4;
const DRI: u8 = 0xDD;
const DNL: u8 = 0xDC;

/// Zigzag scan index -> natural (row-major) index.
pub const ZIGZAG_TO_NATURAL: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Subsampling {
    S444,
    S422,
}

impl Subsampling {
    pub fn mcu_width(self) -> usize {
        match self {
            Subsampling::S444 => 8,
            Subsampling::S422 => 16,
        }
    }

    /// Luma blocks per MCU (always a single row of blocks).
    pub fn luma_blocks_per_mcu(self) -> usize {
        self.mcu_width() / 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentSpec {
    pub id: u8,
    pub h: u8,
    pub v: u8,
    pub quant_table: u8,
    pub dc_table: u8,
    pub ac_table: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableClass {
    Dc,
    Ac,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanSpec {
    pub class: TableClass,
    pub id: u8,
    /// Number of codes of each length 1..=16.
    pub counts: [u8; 16],
    pub symbols: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageGeometry {
    pub width: usize,
    pub height: usize,
    pub subsampling: Subsampling,
    pub mcu_width: usize,
    pub mcu_height: usize,
    pub mcus_per_row: usize,
    pub mcu_rows: usize,
}

impl ImageGeometry {
    pub fn new(width: usize, height: usize, subsampling: Subsampling) -> Self {
        let mcu_width = subsampling.mcu_width();
        let mcu_height = 8;
        ImageGeometry {
            width,
            height,
            subsampling,
            mcu_width,
            mcu_height,
            mcus_per_row: width.div_ceil(mcu_width),
            mcu_rows: height.div_ceil(mcu_height),
        }
    }

    /// Blocks per MCU row for component `c` (0 = Y, 1 = Cb, 2 = Cr).
    pub fn blocks_per_row(&self, c: usize) -> usize {
        if c == 0 {
            self.mcus_per_row * self.subsampling.luma_blocks_per_mcu()
        } else {
            self.mcus_per_row
        }
    }

    /// Pixel rows covered by MCU rows `rows`, clipped to the image.
    pub fn pixel_rows(&self, rows: Range<usize>) -> Range<usize> {
        let start = (rows.start * self.mcu_height).min(self.height);
        let end = (rows.end * self.mcu_height).min(self.height);
        start..end
    }
}

/// Parsed headers of a single-scan baseline stream. Owns a copy of the file
/// so the entropy-coded span can be read from any lane.
#[derive(Debug, Clone)]
pub struct ParsedJpeg {
    pub width: usize,
    pub height: usize,
    pub subsampling: Subsampling,
    /// Frame order: Y, Cb, Cr.
    pub components: [ComponentSpec; 3],
    /// Quantization tables in zigzag order, indexed by table id.
    pub quant_tables: [Option<[u16; 64]>; 4],
    pub huffman_specs: Vec<HuffmanSpec>,
    pub restart_interval: u16,
    /// Byte range of the scan data: after the SOS header, up to (excluding) EOI.
    pub entropy_span: Range<usize>,
    pub file_size: usize,
    data: Arc<[u8]>,
}

impl ParsedJpeg {
    pub fn geometry(&self) -> ImageGeometry {
        geometry_of(self)
    }

    pub fn entropy_data(&self) -> &[u8] {
        &self.data[self.entropy_span.clone()]
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn huffman_spec(&self, class: TableClass, id: u8) -> Option<&HuffmanSpec> {
        self.huffman_specs.iter().find(|s| s.class == class && s.id == id)
    }

    /// Quantization table of component `c`, de-zigzagged into natural order.
    pub fn natural_qtable(&self, c: usize) -> [u16; 64] {
        let zz = self.quant_tables[self.components[c].quant_table as usize]
            .expect("component quant table validated at parse time");
        let mut out = [0u16; 64];
        for (k, &q) in zz.iter().enumerate() {
            out[ZIGZAG_TO_NATURAL[k]] = q;
        }
        out
    }

    /// Equality of everything decoded from header segments. Ignores where the
    /// scan data sits in the file and the file size.
    pub fn same_headers(&self, other: &ParsedJpeg) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.subsampling == other.subsampling
            && self.components == other.components
            && self.quant_tables == other.quant_tables
            && self.huffman_specs == other.huffman_specs
            && self.restart_interval == other.restart_interval
    }

    /// Re-emits SOI and the decoding-relevant header segments, ending with the
    /// SOS header. APPn/COM segments are not reproduced.
    pub fn serialize_headers(&self) -> Vec<u8> {
        let mut out = vec![0xFF, SOI];
        for (id, table) in self.quant_tables.iter().enumerate() {
            let Some(table) = table else { continue };
            let wide = table.iter().any(|&q| q > 255);
            let mut body = vec![((wide as u8) << 4) | id as u8];
            for &q in table {
                if wide {
                    body.extend_from_slice(&q.to_be_bytes());
                } else {
                    body.push(q as u8);
                }
            }
            push_segment(&mut out, DQT, &body);
        }
        for spec in &self.huffman_specs {
            let class = match spec.class {
                TableClass::Dc => 0u8,
                TableClass::Ac => 1,
            };
            let mut body = vec![(class << 4) | spec.id];
            body.extend_from_slice(&spec.counts);
            body.extend_from_slice(&spec.symbols);
            push_segment(&mut out, DHT, &body);
        }
        let mut sof = vec![8];
        sof.extend_from_slice(&(self.height as u16).to_be_bytes());
        sof.extend_from_slice(&(self.width as u16).to_be_bytes());
        sof.push(3);
        for c in &self.components {
            sof.extend_from_slice(&[c.id, (c.h << 4) | c.v, c.quant_table]);
        }
        push_segment(&mut out, 0xC0, &sof);
        if self.restart_interval > 0 {
            push_segment(&mut out, DRI, &self.restart_interval.to_be_bytes());
        }
        let mut sos = vec![3];
        for c in &self.components {
            sos.extend_from_slice(&[c.id, (c.dc_table << 4) | c.ac_table]);
        }
        sos.extend_from_slice(&[0, 63, 0]);
        push_segment(&mut out, SOS, &sos);
        out
    }
}

fn push_segment(out: &mut Vec<u8>, marker: u8, body: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((body.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(body);
}

pub fn geometry_of(parsed: &ParsedJpeg) -> ImageGeometry {
    ImageGeometry::new(parsed.width, parsed.height, parsed.subsampling)
}

struct Frame {
    width: usize,
    height: usize,
    components: Vec<(u8, u8, u8, u8)>,
}

pub fn parse_stream(bytes: &[u8]) -> Result<ParsedJpeg> {
    if bytes.len() < 2 || bytes[0] != 0xFF || bytes[1] != SOI {
        return Err(Error::MissingMarker("SOI"));
    }
    let mut pos = 2;
    let mut frame: Option<Frame> = None;
    let mut quant_tables: [Option<[u16; 64]>; 4] = [None; 4];
    let mut huffman: Vec<HuffmanSpec> = Vec::new();
    let mut restart_interval = 0u16;

    loop {
        let marker = next_marker(bytes, &mut pos)?;
        match marker {
            EOI => return Err(Error::MissingMarker("SOS")),
            SOI => return Err(Error::CorruptSegment("nested SOI".into())),
            0xD0..=0xD7 | 0x01 => {
                return Err(Error::CorruptSegment(format!("stray marker 0xFF{marker:02X}")))
            }
            _ => {}
        }
        let body = segment_body(bytes, &mut pos)?;
        match marker {
            0xC0 | 0xC1 => {
                if frame.is_some() {
                    return Err(Error::UnsupportedFeature("multiple frames".into()));
                }
                frame = Some(parse_sof(body)?);
            }
            0xC2 => return Err(Error::UnsupportedFeature("progressive DCT (SOF2)".into())),
            0xC3 => return Err(Error::UnsupportedFeature("lossless (SOF3)".into())),
            0xC5..=0xC7 => {
                return Err(Error::UnsupportedFeature(format!("hierarchical (SOF{})", marker - 0xC0)))
            }
            0xC8..=0xCF => return Err(Error::UnsupportedFeature("arithmetic coding".into())),
            DHT => parse_dht(body, &mut huffman)?,
            DQT => parse_dqt(body, &mut quant_tables)?,
            DRI => {
                if body.len() != 2 {
                    return Err(Error::CorruptSegment("DRI length".into()));
                }
                restart_interval = u16::from_be_bytes([body[0], body[1]]);
            }
            SOS => {
                let frame = frame.ok_or(Error::MissingMarker("SOF"))?;
                let scan_start = pos;
                return finish(bytes, frame, body, scan_start, quant_tables, huffman, restart_interval);
            }
            DNL => return Err(Error::UnsupportedFeature("DNL marker".into())),
            // APPn, COM and anything else with a length field.
            _ => {}
        }
    }
}

fn next_marker(bytes: &[u8], pos: &mut usize) -> Result<u8> {
    if *pos >= bytes.len() {
        return Err(Error::CorruptSegment("stream ends before EOI".into()));
    }
    if bytes[*pos] != 0xFF {
        return Err(Error::CorruptSegment(format!("expected marker at offset {}", *pos)));
    }
    while *pos < bytes.len() && bytes[*pos] == 0xFF {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(Error::CorruptSegment("stream ends inside a marker".into()));
    }
    let m = bytes[*pos];
    *pos += 1;
    Ok(m)
}

fn segment_body<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    if *pos + 2 > bytes.len() {
        return Err(Error::CorruptSegment("segment length runs past end of stream".into()));
    }
    let len = u16::from_be_bytes([bytes[*pos], bytes[*pos + 1]]) as usize;
    if len < 2 {
        return Err(Error::CorruptSegment(format!("segment length {len}")));
    }
    if *pos + len > bytes.len() {
        return Err(Error::CorruptSegment(format!(
            "segment length {len} exceeds the {} remaining bytes",
            bytes.len() - *pos
        )));
    }
    let body = &bytes[*pos + 2..*pos + len];
    *pos += len;
    Ok(body)
}

fn parse_sof(body: &[u8]) -> Result<Frame> {
    if body.len() < 6 {
        return Err(Error::CorruptSegment("SOF too short".into()));
    }
    if body[0] != 8 {
        return Err(Error::UnsupportedFeature(format!("{}-bit sample precision", body[0])));
    }
    let height = u16::from_be_bytes([body[1], body[2]]) as usize;
    let width = u16::from_be_bytes([body[3], body[4]]) as usize;
    let n = body[5] as usize;
    if n != 3 {
        return Err(Error::UnsupportedFeature(format!("{n} components")));
    }
    if body.len() != 6 + 3 * n {
        return Err(Error::CorruptSegment("SOF length mismatch".into()));
    }
    if height == 0 {
        return Err(Error::UnsupportedFeature("height defined by DNL".into()));
    }
    if width == 0 {
        return Err(Error::CorruptSegment("zero width".into()));
    }
    let components = body[6..]
        .chunks_exact(3)
        .map(|c| (c[0], c[1] >> 4, c[1] & 0x0F, c[2]))
        .collect();
    Ok(Frame { width, height, components })
}

fn parse_dht(mut body: &[u8], out: &mut Vec<HuffmanSpec>) -> Result<()> {
    while !body.is_empty() {
        if body.len() < 17 {
            return Err(Error::CorruptSegment("DHT too short".into()));
        }
        let (tc, th) = (body[0] >> 4, body[0] & 0x0F);
        if tc > 1 || th > 3 {
            return Err(Error::CorruptSegment(format!("DHT class {tc} id {th}")));
        }
        let mut counts = [0u8; 16];
        counts.copy_from_slice(&body[1..17]);
        let total: usize = counts.iter().map(|&c| c as usize).sum();
        if total > 256 || body.len() < 17 + total {
            return Err(Error::CorruptSegment("DHT symbol count".into()));
        }
        let spec = HuffmanSpec {
            class: if tc == 0 { TableClass::Dc } else { TableClass::Ac },
            id: th,
            counts,
            symbols: body[17..17 + total].to_vec(),
        };
        // Rejects overflowing code spaces up front.
        HuffmanTable::build(&spec)?;
        out.retain(|s| !(s.class == spec.class && s.id == spec.id));
        out.push(spec);
        body = &body[17 + total..];
    }
    out.sort_by_key(|s| (s.class == TableClass::Ac, s.id));
    Ok(())
}

fn parse_dqt(mut body: &[u8], out: &mut [Option<[u16; 64]>; 4]) -> Result<()> {
    while !body.is_empty() {
        let (pq, tq) = (body[0] >> 4, (body[0] & 0x0F) as usize);
        if pq > 1 || tq > 3 {
            return Err(Error::CorruptSegment(format!("DQT precision {pq} id {tq}")));
        }
        let size = if pq == 0 { 64 } else { 128 };
        if body.len() < 1 + size {
            return Err(Error::CorruptSegment("DQT too short".into()));
        }
        let mut table = [0u16; 64];
        for (k, q) in table.iter_mut().enumerate() {
            *q = if pq == 0 {
                body[1 + k] as u16
            } else {
                u16::from_be_bytes([body[1 + 2 * k], body[2 + 2 * k]])
            };
        }
        if table.contains(&0) {
            return Err(Error::CorruptSegment("zero quantizer".into()));
        }
        out[tq] = Some(table);
        body = &body[1 + size..];
    }
    Ok(())
}

fn finish(
    bytes: &[u8],
    frame: Frame,
    sos: &[u8],
    scan_start: usize,
    quant_tables: [Option<[u16; 64]>; 4],
    huffman_specs: Vec<HuffmanSpec>,
    restart_interval: u16,
) -> Result<ParsedJpeg> {
    let subsampling = match frame.components.as_slice() {
        [(_, 1, 1, _), (_, 1, 1, _), (_, 1, 1, _)] => Subsampling::S444,
        [(_, 2, 1, _), (_, 1, 1, _), (_, 1, 1, _)] => Subsampling::S422,
        other => {
            let factors: Vec<String> = other.iter().map(|c| format!("{}x{}", c.1, c.2)).collect();
            return Err(Error::UnsupportedFeature(format!(
                "sampling factors {}",
                factors.join(",")
            )));
        }
    };

    if sos.is_empty() || sos[0] as usize != 3 || sos.len() != 1 + 2 * 3 + 3 {
        return Err(Error::UnsupportedFeature("non-interleaved or multi-scan stream".into()));
    }
    let (ss, se, a) = (sos[7], sos[8], sos[9]);
    if ss != 0 || se != 63 || a != 0 {
        return Err(Error::UnsupportedFeature("spectral selection / successive approximation".into()));
    }
    let mut components = [ComponentSpec { id: 0, h: 1, v: 1, quant_table: 0, dc_table: 0, ac_table: 0 }; 3];
    for (i, &(id, h, v, tq)) in frame.components.iter().enumerate() {
        let sel = sos[1..7]
            .chunks_exact(2)
            .find(|c| c[0] == id)
            .ok_or_else(|| Error::CorruptSegment(format!("component {id} missing from scan")))?;
        components[i] = ComponentSpec { id, h, v, quant_table: tq, dc_table: sel[1] >> 4, ac_table: sel[1] & 0x0F };
    }
    // Scan order must match frame order for our MCU layout.
    for (i, c) in sos[1..7].chunks_exact(2).enumerate() {
        if c[0] != components[i].id {
            return Err(Error::UnsupportedFeature("scan component order differs from frame".into()));
        }
    }
    for c in &components {
        if c.quant_table > 3 || quant_tables[c.quant_table as usize].is_none() {
            return Err(Error::CorruptSegment(format!("component {} references missing quant table", c.id)));
        }
        let has = |class, id| huffman_specs.iter().any(|s| s.class == class && s.id == id);
        if !has(TableClass::Dc, c.dc_table) || !has(TableClass::Ac, c.ac_table) {
            return Err(Error::CorruptSegment(format!("component {} references missing huffman table", c.id)));
        }
    }

    let scan_end = find_scan_end(bytes, scan_start)?;
    Ok(ParsedJpeg {
        width: frame.width,
        height: frame.height,
        subsampling,
        components,
        quant_tables,
        huffman_specs,
        restart_interval,
        entropy_span: scan_start..scan_end,
        file_size: bytes.len(),
        data: Arc::from(bytes),
    })
}

/// Offset of the EOI marker that closes the scan. Stuffed bytes, RSTn and
/// stray non-segment markers stay inside the span.
fn find_scan_end(bytes: &[u8], start: usize) -> Result<usize> {
    let mut i = start;
    while i + 1 < bytes.len() {
        if bytes[i] != 0xFF {
            i += 1;
            continue;
        }
        match bytes[i + 1] {
            EOI => return Ok(i),
            0xFF => i += 1,
            SOS | DHT | DQT | DRI | DNL => {
                return Err(Error::UnsupportedFeature("multiple scans".into()));
            }
            _ => i += 2,
        }
    }
    Err(Error::CorruptSegment("stream truncated before EOI".into()))
}
