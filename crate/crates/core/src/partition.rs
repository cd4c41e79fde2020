//! Host/accelerator row split from the fitted cost models.
//!
//! The accelerator takes the top `h - x` pixel rows and the host the bottom
//! `x`. Every solve is a root search on a balance function `f(x)` that is
//! positive when the host side is the slower one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perf::{estimate_huffman_time, DeviceProfile, PolyModel};

pub const MAX_ITERATIONS: usize = 32;
const MIN_SLOPE: f64 = 1e-12;
/// Rows per MCU row.
pub const MCU_HEIGHT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sps,
    Pps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// `f` had no sign change and the plan sits on a boundary.
    Boundary,
    Newton,
    Bisection,
}

/// Model predictions for the chosen split, in ns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub t_cpu: f64,
    pub t_gpu: f64,
    pub t_huff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub scheme: Scheme,
    /// Pixel rows covered by this plan.
    pub height: usize,
    /// Pixel rows for the host parallel phase (bottom of the region).
    pub x_cpu_rows: usize,
    /// Pixel rows for the accelerator (top of the region).
    pub accel_rows: usize,
    /// Pixel rows per accelerator chunk.
    pub chunk_rows: usize,
    /// Unrounded root.
    pub x_exact: f64,
    pub predicted: Predicted,
    pub method: SolveMethod,
    pub iterations: usize,
}

impl PartitionPlan {
    pub fn accel_mcu_rows(&self) -> usize {
        self.accel_rows.div_ceil(MCU_HEIGHT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepartitionState {
    /// Whole-image Huffman estimate, ns.
    pub estimated_total_huff: f64,
    /// Measured Huffman time so far, ns.
    pub actual_huff_so_far: f64,
    /// Pixel rows not yet entropy-decoded (h').
    pub rows_remaining: usize,
    /// Image height h.
    pub height: usize,
    /// Density the original plan used.
    pub density: f64,
    /// Estimated remaining busy time of already submitted accelerator work.
    pub prev_gpu_remaining: f64,
}

/// A model evaluated as a duration: clamped at zero, and flat where clamped.
struct Cost<'a> {
    model: &'a PolyModel,
    dh: PolyModel,
}

impl<'a> Cost<'a> {
    fn new(model: &'a PolyModel) -> Self {
        Cost { model, dh: model.derivative(1) }
    }

    fn at(&self, w: f64, h: f64) -> f64 {
        self.model.eval_clamped(&[w, h])
    }

    /// Cost of `rows` rows; a lane with no rows costs nothing.
    fn rows(&self, w: f64, rows: f64) -> f64 {
        if rows > 0.0 {
            self.at(w, rows)
        } else {
            0.0
        }
    }

    /// d/dh.
    fn slope(&self, w: f64, h: f64) -> f64 {
        if self.model.eval(&[w, h]) < 0.0 {
            0.0
        } else {
            self.dh.eval(&[w, h])
        }
    }
}

struct Root {
    x: f64,
    method: SolveMethod,
    iterations: usize,
}

/// Root of `f` on `[0, hi]`, assuming `f` increases through its root.
/// Newton from the midpoint with a bisection fallback on flat slopes or
/// non-convergence.
fn solve_balance(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, hi: f64) -> Root {
    if hi <= 0.0 || f(0.0) >= 0.0 {
        return Root { x: 0.0, method: SolveMethod::Boundary, iterations: 0 };
    }
    if f(hi) < 0.0 {
        return Root { x: hi, method: SolveMethod::Boundary, iterations: 0 };
    }
    let mut x = hi / 2.0;
    for it in 1..=MAX_ITERATIONS {
        let slope = df(x);
        if !slope.is_finite() || slope.abs() < MIN_SLOPE {
            return bisect(&f, hi, it);
        }
        let next = (x - f(x) / slope).clamp(0.0, hi);
        let step = (next - x).abs();
        x = next;
        if step < 1.0 {
            return Root { x, method: SolveMethod::Newton, iterations: it };
        }
    }
    bisect(&f, hi, MAX_ITERATIONS)
}

fn bisect(f: &impl Fn(f64) -> f64, hi: f64, spent: usize) -> Root {
    let (mut lo, mut hi) = (0.0, hi);
    let mut it = spent;
    while hi - lo >= 1.0 {
        let mid = (lo + hi) / 2.0;
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    Root { x: (lo + hi) / 2.0, method: SolveMethod::Bisection, iterations: it }
}

/// Accelerator rows for a host share of `x` out of `h`, on an MCU row
/// boundary. A partial last MCU row always stays with whichever side owns
/// the bottom of the image.
fn round_split(h: usize, x: f64) -> (usize, usize) {
    let accel = ((h as f64 - x) / MCU_HEIGHT as f64).round().max(0.0) as usize * MCU_HEIGHT;
    let accel = if accel >= h { h } else { accel };
    (h - accel, accel)
}

struct Models<'a> {
    p_cpu: Cost<'a>,
    p_gpu: Cost<'a>,
    t_disp: Cost<'a>,
}

impl<'a> Models<'a> {
    fn of(profile: &'a DeviceProfile) -> Self {
        let m = &profile.models;
        Models { p_cpu: Cost::new(&m.p_cpu), p_gpu: Cost::new(&m.p_gpu), t_disp: Cost::new(&m.t_disp) }
    }
}

/// Full Huffman first, then the parallel phase split once.
pub fn solve_sps(profile: &DeviceProfile, width: usize, height: usize, _density: f64) -> PartitionPlan {
    let m = Models::of(profile);
    let (w, h) = (width as f64, height as f64);
    let f = |x: f64| m.t_disp.rows(w, h - x) + m.p_cpu.rows(w, x) - m.p_gpu.rows(w, h - x);
    let df = |x: f64| -m.t_disp.slope(w, h - x) + m.p_cpu.slope(w, x) + m.p_gpu.slope(w, h - x);
    let root = solve_balance(f, df, h);
    let (x_cpu, accel) = round_split(height, root.x);
    let (xc, xa) = (x_cpu as f64, accel as f64);
    PartitionPlan {
        scheme: Scheme::Sps,
        height,
        x_cpu_rows: x_cpu,
        accel_rows: accel,
        chunk_rows: accel,
        x_exact: root.x,
        predicted: Predicted {
            t_cpu: m.t_disp.rows(w, xa) + m.p_cpu.rows(w, xc),
            t_gpu: m.p_gpu.rows(w, xa),
            t_huff: 0.0,
        },
        method: root.method,
        iterations: root.iterations,
    }
}

/// Chunked Huffman with the accelerator share dispatched as it completes.
pub fn solve_pps(profile: &DeviceProfile, width: usize, height: usize, density: f64) -> PartitionPlan {
    let m = Models::of(profile);
    let (w, h) = (width as f64, height as f64);
    let c = (profile.chunk_rows * MCU_HEIGHT).min(height);
    // Host Huffman after the first dispatch covers every row below the
    // first chunk, which is shorter than `c` when the accelerator share is.
    let per_row = profile.models.t_huff_per_pixel.eval(&[density]).max(0.0) * w;
    let huff_rows = |x: f64| (h - c as f64).max(x);
    let f = |x: f64| {
        per_row * huff_rows(x) + m.p_cpu.rows(w, x) + m.t_disp.rows(w, h - x) - m.p_gpu.rows(w, h - x)
    };
    let df = |x: f64| {
        let dh = if x > h - c as f64 { per_row } else { 0.0 };
        dh + m.p_cpu.slope(w, x) - m.t_disp.slope(w, h - x) + m.p_gpu.slope(w, h - x)
    };
    let root = solve_balance(f, df, h);
    let (x_cpu, accel) = round_split(height, root.x);
    let (xc, xa) = (x_cpu as f64, accel as f64);
    PartitionPlan {
        scheme: Scheme::Pps,
        height,
        x_cpu_rows: x_cpu,
        accel_rows: accel,
        chunk_rows: c,
        x_exact: root.x,
        predicted: Predicted {
            t_cpu: per_row * huff_rows(xc) + m.p_cpu.rows(w, xc) + m.t_disp.rows(w, xa),
            t_gpu: m.p_gpu.rows(w, xa),
            t_huff: estimate_huffman_time(profile, width, height, density),
        },
        method: root.method,
        iterations: root.iterations,
    }
}

/// Density implied by the Huffman time still to come.
pub fn update_density(state: &RepartitionState) -> Result<f64> {
    if state.estimated_total_huff.is_nan() || state.estimated_total_huff <= 0.0 || state.rows_remaining == 0 || state.height == 0 {
        return Err(Error::ZeroEstimate);
    }
    let remaining = (state.estimated_total_huff - state.actual_huff_so_far).max(0.0);
    let time_ratio = remaining / state.estimated_total_huff;
    let height_ratio = state.rows_remaining as f64 / state.height as f64;
    Ok(time_ratio / height_ratio * state.density)
}

/// Re-solves the split over the `h'` rows still to be entropy-decoded,
/// accounting for accelerator work already queued. The returned plan covers
/// only those rows.
pub fn repartition(state: &RepartitionState, profile: &DeviceProfile, width: usize) -> Result<(PartitionPlan, f64)> {
    let d2 = update_density(state)?;
    let m = Models::of(profile);
    let w = width as f64;
    let h2 = state.rows_remaining as f64;
    let t_huff = estimate_huffman_time(profile, width, state.rows_remaining, d2);
    let prev = state.prev_gpu_remaining.max(0.0);
    let f = |x: f64| m.t_disp.rows(w, h2 - x) + t_huff + m.p_cpu.rows(w, x) - m.p_gpu.rows(w, h2 - x) - prev;
    let df = |x: f64| -m.t_disp.slope(w, h2 - x) + m.p_cpu.slope(w, x) + m.p_gpu.slope(w, h2 - x);
    let root = solve_balance(f, df, h2);
    let (x_cpu, accel) = round_split(state.rows_remaining, root.x);
    let (xc, xa) = (x_cpu as f64, accel as f64);
    let plan = PartitionPlan {
        scheme: Scheme::Pps,
        height: state.rows_remaining,
        x_cpu_rows: x_cpu,
        accel_rows: accel,
        chunk_rows: (profile.chunk_rows * MCU_HEIGHT).min(state.rows_remaining).max(1),
        x_exact: root.x,
        predicted: Predicted {
            t_cpu: t_huff + m.p_cpu.rows(w, xc) + m.t_disp.rows(w, xa),
            t_gpu: prev + m.p_gpu.rows(w, xa),
            t_huff,
        },
        method: root.method,
        iterations: root.iterations,
    };
    Ok((plan, d2))
}
