use serde::{Deserialize, Serialize};

use super::color::{fused_upsample_color_422, upsample_row_422, ycbcr_to_rgb};
use super::{dequantize, idct, IdctKind};
use crate::buffer::{Block, CoefRows};
use crate::parser::{ImageGeometry, ParsedJpeg, Subsampling};

/// Kernel path for a band of MCU rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Separate IDCT, upsampling and color passes over materialized planes.
    Unfused,
    /// IDCT merged with color conversion (4:4:4) or upsampling merged with
    /// color conversion (4:2:2).
    Fused,
}

/// Everything a kernel needs besides the coefficients.
#[derive(Debug, Clone)]
pub struct KernelContext {
    pub geometry: ImageGeometry,
    /// Natural-order quantization table per component.
    pub qtables: [[u16; 64]; 3],
    pub idct: IdctKind,
}

impl KernelContext {
    pub fn new(parsed: &ParsedJpeg, idct: IdctKind) -> Self {
        KernelContext {
            geometry: parsed.geometry(),
            qtables: std::array::from_fn(|c| parsed.natural_qtable(c)),
            idct,
        }
    }

    /// Bytes of RGB output for `coefs`.
    pub fn output_len(&self, coefs: &CoefRows<'_>) -> usize {
        self.geometry.pixel_rows(coefs.rows()).len() * self.geometry.width * 3
    }
}

pub fn fused_idct_color_444(
    y: &Block,
    cb: &Block,
    cr: &Block,
    qtables: &[[u16; 64]; 3],
    kind: IdctKind,
) -> [[u8; 3]; 64] {
    let ys = idct(kind, &dequantize(y, &qtables[0]));
    let cbs = idct(kind, &dequantize(cb, &qtables[1]));
    let crs = idct(kind, &dequantize(cr, &qtables[2]));
    std::array::from_fn(|i| ycbcr_to_rgb(ys[i], cbs[i], crs[i]))
}

/// Runs the parallel phase over every MCU row of `coefs`, writing the
/// clipped RGB rows into `out`, which starts at the band's first pixel row.
pub fn run_band(ctx: &KernelContext, kind: KernelKind, coefs: CoefRows<'_>, out: &mut [u8]) {
    assert_eq!(out.len(), ctx.output_len(&coefs), "output slice does not match band");
    match (kind, ctx.geometry.subsampling) {
        (KernelKind::Fused, Subsampling::S444) => fused_444(ctx, coefs, out),
        (KernelKind::Fused, Subsampling::S422) => fused_422(ctx, coefs, out),
        (KernelKind::Unfused, _) => unfused(ctx, coefs, out),
    }
}

fn valid_rows(g: &ImageGeometry, mcu_row: usize) -> usize {
    g.height.saturating_sub(mcu_row * 8).min(8)
}

struct Planes {
    y: Vec<u8>,
    cb: Vec<u8>,
    cr: Vec<u8>,
    y_stride: usize,
    c_stride: usize,
}

impl Planes {
    fn new(g: &ImageGeometry) -> Self {
        let y_stride = g.mcus_per_row * g.mcu_width;
        let c_stride = g.mcus_per_row * 8;
        Planes { y: vec![0; y_stride * 8], cb: vec![0; c_stride * 8], cr: vec![0; c_stride * 8], y_stride, c_stride }
    }

    fn fill(&mut self, ctx: &KernelContext, coefs: &CoefRows<'_>, r: usize) {
        for c in 0..3 {
            let (plane, stride) = match c {
                0 => (&mut self.y, self.y_stride),
                1 => (&mut self.cb, self.c_stride),
                _ => (&mut self.cr, self.c_stride),
            };
            for (b, blk) in coefs.row(c, r).iter().enumerate() {
                let s = idct(ctx.idct, &dequantize(blk, &ctx.qtables[c]));
                for yy in 0..8 {
                    plane[yy * stride + b * 8..yy * stride + b * 8 + 8].copy_from_slice(&s[yy * 8..yy * 8 + 8]);
                }
            }
        }
    }
}

fn neighbours(row: &[u8], b: usize, blocks: usize) -> (Option<u8>, Option<u8>) {
    let left = (b > 0).then(|| row[b * 8 - 1]);
    let right = (b + 1 < blocks).then(|| row[b * 8 + 8]);
    (left, right)
}

fn upsample_plane_row(row: &[u8], blocks: usize, out: &mut [u8]) {
    for b in 0..blocks {
        let (l, r) = neighbours(row, b, blocks);
        let input: &[u8; 8] = row[b * 8..b * 8 + 8].try_into().unwrap();
        out[b * 16..b * 16 + 16].copy_from_slice(&upsample_row_422(input, l, r));
    }
}

fn unfused(ctx: &KernelContext, coefs: CoefRows<'_>, out: &mut [u8]) {
    let g = &ctx.geometry;
    let mut planes = Planes::new(g);
    let mut ucb = vec![0u8; planes.y_stride];
    let mut ucr = vec![0u8; planes.y_stride];
    let line = g.width * 3;
    for r in 0..coefs.row_count {
        planes.fill(ctx, &coefs, r);
        for yy in 0..valid_rows(g, coefs.first_row + r) {
            let cb_row = &planes.cb[yy * planes.c_stride..(yy + 1) * planes.c_stride];
            let cr_row = &planes.cr[yy * planes.c_stride..(yy + 1) * planes.c_stride];
            let (cb_full, cr_full): (&[u8], &[u8]) = match g.subsampling {
                Subsampling::S444 => (cb_row, cr_row),
                Subsampling::S422 => {
                    upsample_plane_row(cb_row, g.mcus_per_row, &mut ucb);
                    upsample_plane_row(cr_row, g.mcus_per_row, &mut ucr);
                    (&ucb, &ucr)
                }
            };
            let y_row = &planes.y[yy * planes.y_stride..];
            let dst = &mut out[(r * 8 + yy) * line..(r * 8 + yy + 1) * line];
            for (x, px) in dst.chunks_exact_mut(3).enumerate() {
                px.copy_from_slice(&ycbcr_to_rgb(y_row[x], cb_full[x], cr_full[x]));
            }
        }
    }
}

fn fused_444(ctx: &KernelContext, coefs: CoefRows<'_>, out: &mut [u8]) {
    let g = &ctx.geometry;
    let line = g.width * 3;
    for r in 0..coefs.row_count {
        let rows = valid_rows(g, coefs.first_row + r);
        let (y, cb, cr) = (coefs.row(0, r), coefs.row(1, r), coefs.row(2, r));
        for m in 0..g.mcus_per_row {
            let px = fused_idct_color_444(&y[m], &cb[m], &cr[m], &ctx.qtables, ctx.idct);
            let cols = (g.width - m * 8).min(8);
            for yy in 0..rows {
                let at = (r * 8 + yy) * line + m * 24;
                for xx in 0..cols {
                    out[at + xx * 3..at + xx * 3 + 3].copy_from_slice(&px[yy * 8 + xx]);
                }
            }
        }
    }
}

fn fused_422(ctx: &KernelContext, coefs: CoefRows<'_>, out: &mut [u8]) {
    let g = &ctx.geometry;
    let mut planes = Planes::new(g);
    let line = g.width * 3;
    for r in 0..coefs.row_count {
        planes.fill(ctx, &coefs, r);
        for yy in 0..valid_rows(g, coefs.first_row + r) {
            let cb_row = &planes.cb[yy * planes.c_stride..(yy + 1) * planes.c_stride];
            let cr_row = &planes.cr[yy * planes.c_stride..(yy + 1) * planes.c_stride];
            let y_row = &planes.y[yy * planes.y_stride..(yy + 1) * planes.y_stride];
            for b in 0..g.mcus_per_row {
                let px = fused_upsample_color_422(
                    y_row[b * 16..b * 16 + 16].try_into().unwrap(),
                    cb_row[b * 8..b * 8 + 8].try_into().unwrap(),
                    cr_row[b * 8..b * 8 + 8].try_into().unwrap(),
                    neighbours(cb_row, b, g.mcus_per_row),
                    neighbours(cr_row, b, g.mcus_per_row),
                );
                let cols = (g.width - b * 16).min(16);
                let at = (r * 8 + yy) * line + b * 48;
                for (xx, p) in px[..cols].iter().enumerate() {
                    out[at + xx * 3..at + xx * 3 + 3].copy_from_slice(p);
                }
            }
        }
    }
}
