use std::sync::LazyLock;

struct ChromaTables {
    r_cr: [f64; 256],
    g_cb: [f64; 256],
    g_cr: [f64; 256],
    b_cb: [f64; 256],
}

// Each entry is the same double product the per-pixel formula would form, so
// table lookups change nothing about the result.
static TABLES: LazyLock<ChromaTables> = LazyLock::new(|| {
    let f = |k: f64| -> [f64; 256] { std::array::from_fn(|c| k * (c as f64 - 128.0)) };
    ChromaTables { r_cr: f(1.402), g_cb: f(0.34414), g_cr: f(0.71414), b_cb: f(1.772) }
});

#[inline]
fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn ycbcr_to_rgb(y: u8, cb: u8, cr: u8) -> [u8; 3] {
    let t = &*TABLES;
    let y = y as f64;
    [
        to_byte(y + t.r_cr[cr as usize]),
        to_byte(y - t.g_cb[cb as usize] - t.g_cr[cr as usize]),
        to_byte(y + t.b_cb[cb as usize]),
    ]
}

/// Horizontal 2x triangular upsampling of one 8-sample chroma row. `left`
/// and `right` are the adjacent samples of the neighbouring blocks; without
/// them the end outputs copy the end inputs.
pub fn upsample_row_422(input: &[u8; 8], left: Option<u8>, right: Option<u8>) -> [u8; 16] {
    let s: [u32; 8] = input.map(u32::from);
    let mut out = [0u8; 16];
    out[0] = match left {
        Some(l) => ((s[0] * 3 + l as u32 + 1) / 4) as u8,
        None => input[0],
    };
    for k in 0..7 {
        out[2 * k + 1] = ((s[k] * 3 + s[k + 1] + 2) / 4) as u8;
        out[2 * k + 2] = ((s[k + 1] * 3 + s[k] + 1) / 4) as u8;
    }
    out[15] = match right {
        Some(r) => ((s[7] * 3 + r as u32 + 2) / 4) as u8,
        None => input[7],
    };
    out
}

/// Upsamples both chroma rows and converts the 16 pixels without
/// materializing the upsampled rows. Neighbours are `(left, right)`.
pub fn fused_upsample_color_422(
    y: &[u8; 16],
    cb: &[u8; 8],
    cr: &[u8; 8],
    cb_nb: (Option<u8>, Option<u8>),
    cr_nb: (Option<u8>, Option<u8>),
) -> [[u8; 3]; 16] {
    #[inline(always)]
    fn left_of(s: &[u8; 8], k: usize, nb: Option<u8>) -> u8 {
        match (k, nb) {
            (0, Some(l)) => ((s[0] as u32 * 3 + l as u32 + 1) / 4) as u8,
            (0, None) => s[0],
            _ => ((s[k] as u32 * 3 + s[k - 1] as u32 + 1) / 4) as u8,
        }
    }
    #[inline(always)]
    fn right_of(s: &[u8; 8], k: usize, nb: Option<u8>) -> u8 {
        match (k, nb) {
            (7, Some(r)) => ((s[7] as u32 * 3 + r as u32 + 2) / 4) as u8,
            (7, None) => s[7],
            _ => ((s[k] as u32 * 3 + s[k + 1] as u32 + 2) / 4) as u8,
        }
    }
    let mut out = [[0u8; 3]; 16];
    for k in 0..8 {
        out[2 * k] = ycbcr_to_rgb(y[2 * k], left_of(cb, k, cb_nb.0), left_of(cr, k, cr_nb.0));
        out[2 * k + 1] = ycbcr_to_rgb(y[2 * k + 1], right_of(cb, k, cb_nb.1), right_of(cr, k, cr_nb.1));
    }
    out
}
