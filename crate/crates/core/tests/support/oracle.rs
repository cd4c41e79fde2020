//! Slow double-precision reference decoder, written without any of the
//! library's code paths. Bit-at-a-time Huffman, quadruple-loop IDCT,
//! per-pixel upsampling and colour conversion.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::LazyLock;

pub struct Decoded {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
    /// Quantized coefficients per component, natural order, raster block order.
    pub coefs: [Vec<[i32; 64]>; 3],
    pub h_factor: usize,
}

/// Zigzag index -> natural index, generated by walking the anti-diagonals.
pub fn zigzag_order() -> [usize; 64] {
    let mut out = [0usize; 64];
    let mut k = 0;
    for s in 0..15usize {
        let rows: Vec<usize> = (0..8).filter(|&r| s >= r && s - r < 8).collect();
        let ordered: Vec<usize> = if s % 2 == 1 { rows } else { rows.into_iter().rev().collect() };
        for r in ordered {
            out[k] = r * 8 + (s - r);
            k += 1;
        }
    }
    out
}

struct Component {
    h: usize,
    tq: usize,
    td: usize,
    ta: usize,
}

type Codes = HashMap<(u8, u16), u8>;

fn canonical_codes(counts: &[u8], symbols: &[u8]) -> Codes {
    let mut map = HashMap::new();
    let mut code: u16 = 0;
    let mut k = 0;
    for (i, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            map.insert((i as u8 + 1, code), symbols[k]);
            code += 1;
            k += 1;
        }
        code <<= 1;
    }
    map
}

struct BitReader {
    bytes: Vec<u8>,
    bit: usize,
}

impl BitReader {
    fn bit(&mut self) -> u16 {
        let byte = self.bytes.get(self.bit / 8).copied().expect("oracle ran out of entropy bits");
        let b = (byte >> (7 - self.bit % 8)) & 1;
        self.bit += 1;
        b as u16
    }

    fn bits(&mut self, n: u8) -> u16 {
        (0..n).fold(0, |acc, _| (acc << 1) | self.bit())
    }

    fn symbol(&mut self, codes: &Codes) -> u8 {
        let mut code = 0u16;
        for len in 1..=16u8 {
            code = (code << 1) | self.bit();
            if let Some(&s) = codes.get(&(len, code)) {
                return s;
            }
        }
        panic!("oracle: no Huffman code matches");
    }

    fn extend(&mut self, size: u8) -> i32 {
        if size == 0 {
            return 0;
        }
        let v = self.bits(size) as i32;
        if v < 1 << (size - 1) {
            v - (1 << size) + 1
        } else {
            v
        }
    }
}

/// Splits scan data on RST markers and removes byte stuffing.
fn restart_segments(data: &[u8]) -> Vec<Vec<u8>> {
    let mut segs = vec![Vec::new()];
    let mut i = 0;
    while i < data.len() {
        if data[i] == 0xFF {
            let next = data.get(i + 1).copied().unwrap_or(0xD9);
            match next {
                0x00 => {
                    segs.last_mut().unwrap().push(0xFF);
                    i += 2;
                }
                0xD0..=0xD7 => {
                    segs.push(Vec::new());
                    i += 2;
                }
                0xFF => i += 1,
                _ => break,
            }
        } else {
            segs.last_mut().unwrap().push(data[i]);
            i += 1;
        }
    }
    segs
}

pub fn decode(jpeg: &[u8]) -> Decoded {
    decode_with(jpeg, true)
}

/// Coefficients only, skipping the pixel stages.
pub fn coefficients(jpeg: &[u8]) -> Decoded {
    decode_with(jpeg, false)
}

fn decode_with(jpeg: &[u8], pixels: bool) -> Decoded {
    let zz = zigzag_order();
    let mut qt = [[0u16; 64]; 4];
    let mut dc: HashMap<usize, Codes> = HashMap::new();
    let mut ac: HashMap<usize, Codes> = HashMap::new();
    let mut comps: Vec<Component> = Vec::new();
    let (mut width, mut height, mut restart) = (0usize, 0usize, 0usize);
    let mut pos = 2;
    let scan_start;
    loop {
        assert_eq!(jpeg[pos], 0xFF, "oracle expects a marker at {pos}");
        let m = jpeg[pos + 1];
        let len = u16::from_be_bytes([jpeg[pos + 2], jpeg[pos + 3]]) as usize;
        let body = &jpeg[pos + 4..pos + 2 + len];
        match m {
            0xDB => {
                let mut b = body;
                while !b.is_empty() {
                    let (pq, tq) = (b[0] >> 4, (b[0] & 15) as usize);
                    for k in 0..64 {
                        let v = if pq == 0 { b[1 + k] as u16 } else { u16::from_be_bytes([b[1 + 2 * k], b[2 + 2 * k]]) };
                        qt[tq][zz[k]] = v;
                    }
                    b = &b[if pq == 0 { 65 } else { 129 }..];
                }
            }
            0xC4 => {
                let mut b = body;
                while !b.is_empty() {
                    let n: usize = b[1..17].iter().map(|&c| c as usize).sum();
                    let codes = canonical_codes(&b[1..17], &b[17..17 + n]);
                    let id = (b[0] & 15) as usize;
                    if b[0] >> 4 == 0 {
                        dc.insert(id, codes);
                    } else {
                        ac.insert(id, codes);
                    }
                    b = &b[17 + n..];
                }
            }
            0xC0 | 0xC1 => {
                height = u16::from_be_bytes([body[1], body[2]]) as usize;
                width = u16::from_be_bytes([body[3], body[4]]) as usize;
                for c in body[6..].chunks(3) {
                    comps.push(Component { h: (c[1] >> 4) as usize, tq: c[2] as usize, td: 0, ta: 0 });
                }
            }
            0xDD => restart = u16::from_be_bytes([body[0], body[1]]) as usize,
            0xDA => {
                for (i, s) in body[1..1 + 3 * 2].chunks(2).enumerate() {
                    comps[i].td = (s[1] >> 4) as usize;
                    comps[i].ta = (s[1] & 15) as usize;
                }
                scan_start = pos + 2 + len;
                break;
            }
            _ => {}
        }
        pos += 2 + len;
    }

    let hmax = comps.iter().map(|c| c.h).max().unwrap();
    let mcu_w = 8 * hmax;
    let mcus_x = width.div_ceil(mcu_w);
    let mcus_y = height.div_ceil(8);
    let total = mcus_x * mcus_y;
    let per_seg = if restart == 0 { total } else { restart };

    let mut coefs: [Vec<[i32; 64]>; 3] = Default::default();
    for (c, comp) in comps.iter().enumerate() {
        coefs[c] = vec![[0; 64]; total * comp.h];
    }
    let segments = restart_segments(&jpeg[scan_start..]);
    let mut mcu = 0;
    for seg in segments {
        if mcu >= total {
            break;
        }
        let mut r = BitReader { bytes: seg, bit: 0 };
        let mut pred = [0i32; 3];
        for _ in 0..per_seg.min(total - mcu) {
            let (my, mx) = (mcu / mcus_x, mcu % mcus_x);
            for (c, comp) in comps.iter().enumerate() {
                for b in 0..comp.h {
                    let mut zblock = [0i32; 64];
                    let t = r.symbol(&dc[&comp.td]);
                    pred[c] += r.extend(t);
                    zblock[0] = pred[c];
                    let mut k = 1;
                    while k < 64 {
                        let rs = r.symbol(&ac[&comp.ta]);
                        let (run, size) = ((rs >> 4) as usize, rs & 15);
                        if size == 0 {
                            if run == 15 {
                                k += 16;
                                continue;
                            }
                            break;
                        }
                        k += run;
                        zblock[k] = r.extend(size);
                        k += 1;
                    }
                    let mut natural = [0i32; 64];
                    for i in 0..64 {
                        natural[zz[i]] = zblock[i];
                    }
                    coefs[c][my * mcus_x * comp.h + mx * comp.h + b] = natural;
                }
            }
            mcu += 1;
        }
    }

    let mut out = Decoded { width, height, rgb: Vec::new(), coefs, h_factor: hmax };
    if !pixels {
        return out;
    }

    // Sample planes, padded to whole blocks.
    let mut planes: Vec<(usize, Vec<u8>)> = Vec::new();
    for (c, comp) in comps.iter().enumerate() {
        let pw = mcus_x * comp.h * 8;
        let ph = mcus_y * 8;
        let mut plane = vec![0u8; pw * ph];
        let bpr = mcus_x * comp.h;
        for (bi, blk) in out.coefs[c].iter().enumerate() {
            let (by, bx) = (bi / bpr, bi % bpr);
            let mut deq = [0i32; 64];
            for i in 0..64 {
                deq[i] = blk[i] * qt[comp.tq][i] as i32;
            }
            let px = idct_reference(&deq);
            for y in 0..8 {
                for x in 0..8 {
                    plane[(by * 8 + y) * pw + bx * 8 + x] = round_pinned(px[y * 8 + x] + 128.0);
                }
            }
        }
        planes.push((pw, plane));
    }

    // Chroma at full luma width.
    let luma_w = planes[0].0;
    let mut full: Vec<Vec<u8>> = vec![planes[0].1.clone()];
    for (pw, plane) in &planes[1..] {
        if *pw == luma_w {
            full.push(plane.clone());
            continue;
        }
        let mut up = vec![0u8; luma_w * (plane.len() / pw)];
        for (row_in, row_out) in plane.chunks(*pw).zip(up.chunks_mut(luma_w)) {
            for b in 0..pw / 8 {
                let input: [u8; 8] = row_in[b * 8..b * 8 + 8].try_into().unwrap();
                let left = if b > 0 { Some(row_in[b * 8 - 1]) } else { None };
                let right = if b * 8 + 8 < *pw { Some(row_in[b * 8 + 8]) } else { None };
                row_out[b * 16..b * 16 + 16].copy_from_slice(&upsample_literal(&input, left, right));
            }
        }
        full.push(up);
    }

    let mut rgb = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let i = y * luma_w + x;
            rgb.extend_from_slice(&color_reference(full[0][i], full[1][i], full[2][i]));
        }
    }
    out.rgb = rgb;
    out
}

/// The pinned sample rounding: snap to a 1e-6 grid, round half away from
/// zero, clamp.
pub fn round_pinned(v: f64) -> u8 {
    let snapped = (v * 1e6).round() / 1e6;
    snapped.round().clamp(0.0, 255.0) as u8
}

fn c(k: usize) -> f64 {
    if k == 0 {
        std::f64::consts::FRAC_1_SQRT_2
    } else {
        1.0
    }
}

/// `BASIS[y * 8 + x][v * 8 + u]` = C(u) C(v) cos((2x+1)u pi/16) cos((2y+1)v pi/16) / 4.
static BASIS: LazyLock<Vec<[f64; 64]>> = LazyLock::new(|| {
    let mut t = vec![[0.0; 64]; 64];
    for y in 0..8 {
        for x in 0..8 {
            for v in 0..8 {
                for u in 0..8 {
                    t[y * 8 + x][v * 8 + u] = c(u)
                        * c(v)
                        * (((2 * x + 1) * u) as f64 * PI / 16.0).cos()
                        * (((2 * y + 1) * v) as f64 * PI / 16.0).cos()
                        / 4.0;
                }
            }
        }
    }
    t
});

/// Textbook 2-D inverse DCT with `coef[v * 8 + u]`, every output a full
/// 64-term sum. No level shift.
pub fn idct_reference(coef: &[i32; 64]) -> [f64; 64] {
    let mut out = [0.0; 64];
    for (o, basis) in out.iter_mut().zip(BASIS.iter()) {
        for k in 0..64 {
            if coef[k] != 0 {
                *o += basis[k] * coef[k] as f64;
            }
        }
    }
    out
}

/// Orthonormal-pair forward DCT, the inverse of [`idct_reference`].
pub fn fdct_reference(samples: &[f64; 64]) -> [f64; 64] {
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                for x in 0..8 {
                    acc += samples[y * 8 + x]
                        * (((2 * x + 1) * u) as f64 * PI / 16.0).cos()
                        * (((2 * y + 1) * v) as f64 * PI / 16.0).cos();
                }
            }
            out[v * 8 + u] = c(u) * c(v) * acc / 4.0;
        }
    }
    out
}

/// The sixteen printed lines, one at a time. End pixels use the neighbour
/// block's sample when there is one.
pub fn upsample_literal(input: &[u8; 8], left: Option<u8>, right: Option<u8>) -> [u8; 16] {
    let i: Vec<u32> = input.iter().map(|&v| v as u32).collect();
    let mut o = [0u32; 16];
    o[0] = match left {
        Some(l) => (i[0] * 3 + l as u32 + 1) / 4,
        None => i[0],
    };
    o[1] = (i[0] * 3 + i[1] + 2) / 4;
    o[2] = (i[1] * 3 + i[0] + 1) / 4;
    o[3] = (i[1] * 3 + i[2] + 2) / 4;
    o[4] = (i[2] * 3 + i[1] + 1) / 4;
    o[5] = (i[2] * 3 + i[3] + 2) / 4;
    o[6] = (i[3] * 3 + i[2] + 1) / 4;
    o[7] = (i[3] * 3 + i[4] + 2) / 4;
    o[8] = (i[4] * 3 + i[3] + 1) / 4;
    o[9] = (i[4] * 3 + i[5] + 2) / 4;
    o[10] = (i[5] * 3 + i[4] + 1) / 4;
    o[11] = (i[5] * 3 + i[6] + 2) / 4;
    o[12] = (i[6] * 3 + i[5] + 1) / 4;
    o[13] = (i[6] * 3 + i[7] + 2) / 4;
    o[14] = (i[7] * 3 + i[6] + 1) / 4;
    o[15] = match right {
        Some(r) => (i[7] * 3 + r as u32 + 2) / 4,
        None => i[7],
    };
    o.map(|v| v as u8)
}

pub fn color_reference(y: u8, cb: u8, cr: u8) -> [u8; 3] {
    let (y, cb, cr) = (y as f64, cb as f64 - 128.0, cr as f64 - 128.0);
    let r = y + 1.402 * cr;
    let g = y - 0.34414 * cb - 0.71414 * cr;
    let b = y + 1.772 * cb;
    [r, g, b].map(|v| v.round().clamp(0.0, 255.0) as u8)
}
