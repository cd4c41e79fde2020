use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::LazyLock;

use super::IdctKind;

/// `BASIS[x][u] = C(u)/2 * cos((2x+1)uπ/16)`, the 1-D kernel with the
/// per-pass normalization folded in.
static BASIS: LazyLock<[[f64; 8]; 8]> = LazyLock::new(|| {
    let mut t = [[0.0; 8]; 8];
    for (x, row) in t.iter_mut().enumerate() {
        for (u, v) in row.iter_mut().enumerate() {
            let c = if u == 0 { FRAC_1_SQRT_2 } else { 1.0 };
            *v = 0.5 * c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
        }
    }
    t
});

/// AAN input scaling `s[v] * s[u] / 8`, natural order.
static AAN_SCALE: LazyLock<[f64; 64]> = LazyLock::new(|| {
    let s: [f64; 8] =
        std::array::from_fn(|k| if k == 0 { 1.0 } else { (k as f64 * PI / 16.0).cos() * SQRT_2 });
    std::array::from_fn(|i| s[i / 8] * s[i % 8] / 8.0)
});

/// Level-shifted sample to byte. Values are first snapped to a 1e-6 grid so
/// that results which are exact halves in real arithmetic round the same way
/// whichever summation order produced them; then half away from zero, then
/// clamp.
#[inline]
pub fn round_sample(v: f64) -> u8 {
    let snapped = (v * 1e6).round() / 1e6;
    snapped.round().clamp(0.0, 255.0) as u8
}

/// Column pass then row pass, without level shift or rounding.
pub fn idct_direct_f64(coef: &[i32; 64]) -> [f64; 64] {
    let t = &*BASIS;
    let mut cols = [0.0f64; 64];
    for u in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += t[y][v] * coef[v * 8 + u] as f64;
            }
            cols[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0f64; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += t[x][u] * cols[y * 8 + u];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}

pub fn idct_direct(coef: &[i32; 64]) -> [u8; 64] {
    let f = idct_direct_f64(coef);
    std::array::from_fn(|i| round_sample(f[i] + 128.0))
}

#[inline(always)]
fn aan_1d(d: [f64; 8]) -> [f64; 8] {
    let tmp10 = d[0] + d[4];
    let tmp11 = d[0] - d[4];
    let tmp13 = d[2] + d[6];
    let tmp12 = (d[2] - d[6]) * SQRT_2 - tmp13;
    let e0 = tmp10 + tmp13;
    let e3 = tmp10 - tmp13;
    let e1 = tmp11 + tmp12;
    let e2 = tmp11 - tmp12;

    let z13 = d[5] + d[3];
    let z10 = d[5] - d[3];
    let z11 = d[1] + d[7];
    let z12 = d[1] - d[7];
    let o7 = z11 + z13;
    let t11 = (z11 - z13) * SQRT_2;
    let z5 = (z10 + z12) * 1.847_759_065_022_573_5;
    let t10 = z5 - z12 * 1.082_392_200_292_393_9;
    let t12 = z5 - z10 * 2.613_125_929_752_753;
    let o6 = t12 - o7;
    let o5 = t11 - o6;
    let o4 = t10 - o5;

    [e0 + o7, e1 + o6, e2 + o5, e3 + o4, e3 - o4, e2 - o5, e1 - o6, e0 - o7]
}

/// Scaled AAN IDCT in double precision.
pub fn idct_fast(coef: &[i32; 64]) -> [u8; 64] {
    let scale = &*AAN_SCALE;
    let mut ws = [0.0f64; 64];
    for u in 0..8 {
        let col = std::array::from_fn(|v| coef[v * 8 + u] as f64 * scale[v * 8 + u]);
        let r = aan_1d(col);
        for y in 0..8 {
            ws[y * 8 + u] = r[y];
        }
    }
    let mut out = [0u8; 64];
    for y in 0..8 {
        let row: [f64; 8] = ws[y * 8..y * 8 + 8].try_into().unwrap();
        let r = aan_1d(row);
        for x in 0..8 {
            out[y * 8 + x] = round_sample(r[x] + 128.0);
        }
    }
    out
}

#[inline]
pub fn idct(kind: IdctKind, coef: &[i32; 64]) -> [u8; 64] {
    match kind {
        IdctKind::Fast => idct_fast(coef),
        IdctKind::Direct => idct_direct(coef),
    }
}
