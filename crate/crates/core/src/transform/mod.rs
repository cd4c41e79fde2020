//! Per-block and per-row kernels of the parallel phase.
//!
//! Everything here is a pure function on caller-owned data, so any lane may
//! run any kernel on any band of rows.

mod color;
mod idct;
mod kernels;

pub use color::{fused_upsample_color_422, upsample_row_422, ycbcr_to_rgb};
pub use idct::{idct, idct_direct, idct_direct_f64, idct_fast, round_sample};
pub use kernels::{fused_idct_color_444, run_band, KernelContext, KernelKind};

use serde::{Deserialize, Serialize};

use crate::buffer::Block;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdctKind {
    /// Scaled AAN factorization.
    #[default]
    Fast,
    /// Separable matrix form, one 8-point dot product per output.
    Direct,
}

/// Elementwise product with a natural-order quantization table.
#[inline]
pub fn dequantize(block: &Block, qtable: &[u16; 64]) -> [i32; 64] {
    let mut out = [0i32; 64];
    for i in 0..64 {
        out[i] = block[i] as i32 * qtable[i] as i32;
    }
    out
}
