//! End-to-end decode drivers.
//!
//! The calling thread is the orchestrator: it owns the entropy decoder and
//! the host lane, and hands bands to the accelerator lane through tickets.
//! Wall time is read off the virtual timeline described in [`crate::lane`]:
//! the host clock advances by Huffman, dispatch, planning and host compute,
//! and the decode ends when both the host and the accelerator are done.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::buffer::{CoefRows, CoefRowsMut, CoefficientBuffer};
use crate::clock::{measure, prefault};
use crate::entropy::EntropyDecoder;
use crate::error::{Error, Result};
use crate::lane::{AcceleratorLane, HostLane, LaneConfig, Lanes, Ticket, TicketReport, WorkItem};
use crate::parser::{ImageGeometry, ParsedJpeg};
use crate::partition::{repartition, solve_pps, solve_sps, PartitionPlan, RepartitionState, MCU_HEIGHT};
use crate::perf::{entropy_density, estimate_huffman_time, DeviceProfile};
use crate::pixels::PixelBuffer;
use crate::transform::{IdctKind, KernelContext, KernelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// One worker, unfused kernels.
    HostSequential,
    /// Full Huffman, then the host worker pool.
    HostParallel,
    /// Full Huffman, then one accelerator dispatch.
    AcceleratorOnly,
    /// Chunked Huffman with a dispatch per chunk.
    PipelinedAccelerator,
    Sps,
    Pps,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::HostSequential, Mode::HostParallel, Mode::AcceleratorOnly, Mode::PipelinedAccelerator, Mode::Sps, Mode::Pps];

    pub fn name(self) -> &'static str {
        match self {
            Mode::HostSequential => "seq",
            Mode::HostParallel => "par",
            Mode::AcceleratorOnly => "accel",
            Mode::PipelinedAccelerator => "accel-pipe",
            Mode::Sps => "sps",
            Mode::Pps => "pps",
        }
    }

    pub fn needs_profile(self) -> bool {
        matches!(self, Mode::Sps | Mode::Pps)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (expected seq, par, accel, accel-pipe, sps or pps)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    pub idct: IdctKind,
    /// Accelerator chunk height in MCU rows; overrides the profile.
    pub chunk_rows: Option<usize>,
    /// Allow the single PPS re-partition.
    pub repartition: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { idct: IdctKind::Fast, chunk_rows: None, repartition: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneKind {
    Host,
    Accelerator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkTrace {
    pub lane: LaneKind,
    /// MCU rows.
    pub rows: Range<usize>,
    /// Huffman time of these rows.
    pub huffman_ns: u64,
    pub report: TicketReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepartitionRecord {
    /// MCU row at which the re-partition happened.
    pub at_row: usize,
    pub state: RepartitionState,
    pub density: f64,
    pub plan: PartitionPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    pub mode: Mode,
    pub width: usize,
    pub height: usize,
    pub density: f64,
    /// Virtual wall time.
    pub wall_ns: u64,
    /// Real elapsed time of the whole call.
    pub real_ns: u64,
    pub huffman_ns: u64,
    pub host_parallel_ns: u64,
    pub accel_compute_ns: u64,
    pub transfer_ns: u64,
    pub dispatch_ns: u64,
    pub planning_ns: u64,
    pub host_finish_ns: u64,
    pub accel_finish_ns: u64,
    /// Host time of the first accelerator dispatch.
    pub first_dispatch_ns: Option<u64>,
    pub plan: Option<PartitionPlan>,
    pub repartition: Option<RepartitionRecord>,
    pub chunks: Vec<ChunkTrace>,
}

impl DecodeReport {
    fn new(mode: Mode, g: &ImageGeometry, density: f64) -> Self {
        DecodeReport {
            mode,
            width: g.width,
            height: g.height,
            density,
            wall_ns: 0,
            real_ns: 0,
            huffman_ns: 0,
            host_parallel_ns: 0,
            accel_compute_ns: 0,
            transfer_ns: 0,
            dispatch_ns: 0,
            planning_ns: 0,
            host_finish_ns: 0,
            accel_finish_ns: 0,
            first_dispatch_ns: None,
            plan: None,
            repartition: None,
            chunks: Vec::new(),
        }
    }

    /// Pixel rows whose parallel phase ran on the host.
    pub fn x_rows(&self) -> usize {
        self.chunks
            .iter()
            .filter(|c| c.lane == LaneKind::Host)
            .map(|c| c.report.pixels / self.width.max(1))
            .sum()
    }

    pub fn accel_chunks(&self) -> usize {
        self.chunks.iter().filter(|c| c.lane == LaneKind::Accelerator && c.report.pixels > 0).count()
    }

    /// Relative gap between the two lanes' finish times, measured from the
    /// first accelerator dispatch. `None` unless both lanes did work.
    pub fn balance_gap(&self) -> Option<f64> {
        let t0 = self.first_dispatch_ns?;
        if self.x_rows() == 0 || self.accel_chunks() == 0 {
            return None;
        }
        let host = self.host_finish_ns.saturating_sub(t0) as f64;
        let accel = self.accel_finish_ns.saturating_sub(t0) as f64;
        Some((host - accel).abs() / host.max(accel))
    }

    /// `key=value` pairs on one line.
    pub fn to_kv_line(&self) -> String {
        let mut s = format!(
            "mode={} w={} h={} d={:.6} wall_ns={} real_ns={} huff_ns={} par_ns={} accel_ns={} transfer_ns={} dispatch_ns={} planning_ns={} x_rows={} chunks={}",
            self.mode,
            self.width,
            self.height,
            self.density,
            self.wall_ns,
            self.real_ns,
            self.huffman_ns,
            self.host_parallel_ns,
            self.accel_compute_ns,
            self.transfer_ns,
            self.dispatch_ns,
            self.planning_ns,
            self.x_rows(),
            self.accel_chunks(),
        );
        if let Some(r) = &self.repartition {
            s.push_str(&format!(" repartition_row={} repartition_d={:.6}", r.at_row, r.density));
        }
        s
    }
}

/// Largest speedup over `reference` that any schedule can reach while the
/// Huffman stage stays sequential.
pub fn amdahl_bound(reference: &DecodeReport) -> Result<f64> {
    if reference.huffman_ns == 0 {
        return Err(Error::ZeroHuffman);
    }
    Ok(reference.wall_ns as f64 / reference.huffman_ns as f64)
}

/// Decodes `parsed` in `mode`. The pixel output is identical across modes.
pub fn decode(
    parsed: &ParsedJpeg,
    mode: Mode,
    profile: Option<&DeviceProfile>,
    lanes: &Lanes,
    opts: &DecodeOptions,
) -> Result<(PixelBuffer, DecodeReport)> {
    let g = parsed.geometry();
    if mode.needs_profile() && profile.is_none() {
        return Err(Error::MissingProfile(mode.name()));
    }
    let chunk_rows = match mode {
        Mode::PipelinedAccelerator => {
            let c = match (opts.chunk_rows, profile) {
                (Some(c), _) => c,
                (None, Some(p)) => p.chunk_rows,
                (None, None) => return Err(Error::MissingProfile(mode.name())),
            };
            c.max(1)
        }
        Mode::Pps => opts.chunk_rows.unwrap_or_else(|| profile.map_or(1, |p| p.chunk_rows)).max(1),
        _ => g.mcu_rows,
    };
    if mode.needs_profile() && g.height < g.mcu_height {
        return Err(Error::PlanInfeasible(format!("image height {} is below one MCU row", g.height)));
    }

    let real = Instant::now();
    let specialized = profile.map(|p| p.for_subsampling(g.subsampling));
    let profile = specialized.as_ref();
    let ctx = KernelContext::new(parsed, opts.idct);
    let mut coefs = CoefficientBuffer::new(g);
    let mut pixels = PixelBuffer::new(g.width, g.height);
    for plane in [&mut coefs.y, &mut coefs.cb, &mut coefs.cr] {
        prefault(plane);
    }
    prefault(&mut pixels.data);
    let mut dec = EntropyDecoder::new(parsed)?;
    let density = entropy_density(parsed.file_size, g.width, g.height)?;
    let mut run = Run { now: 0, report: DecodeReport::new(mode, &g, density) };

    let view = coefs.rows_mut();
    let out: &mut [u8] = &mut pixels.data;
    match mode {
        Mode::HostSequential => {
            let host = HostLane::new(&ctx, LaneConfig::host(1))?;
            run.host_only(&mut dec, &host, KernelKind::Unfused, view, out)?;
        }
        Mode::HostParallel => {
            let host = HostLane::new(&ctx, lanes.host)?;
            run.host_only(&mut dec, &host, KernelKind::Fused, view, out)?;
        }
        Mode::AcceleratorOnly | Mode::PipelinedAccelerator => {
            run.accelerated(&mut dec, &ctx, lanes.accel, chunk_rows, view, out)?;
        }
        Mode::Sps => {
            let profile = profile.expect("checked above");
            let host = HostLane::new(&ctx, lanes.host)?;
            run.sps(&mut dec, &ctx, &host, lanes.accel, profile, view, out)?;
        }
        Mode::Pps => {
            let profile = profile.expect("checked above");
            let host = HostLane::new(&ctx, lanes.host)?;
            run.pps(&mut dec, &ctx, &host, lanes.accel, profile, chunk_rows, opts.repartition, view, out)?;
        }
    }
    run.report.host_finish_ns = run.now;
    run.report.wall_ns = run.now.max(run.report.accel_finish_ns);
    run.report.real_ns = real.elapsed().as_nanos() as u64;
    Ok((pixels, run.report))
}

fn take_bytes<'a>(out: &mut &'a mut [u8], n: usize) -> &'a mut [u8] {
    let (head, tail) = std::mem::take(out).split_at_mut(n);
    *out = tail;
    head
}

struct Run {
    /// Host clock.
    now: u64,
    report: DecodeReport,
}

impl Run {
    fn huffman<'a>(
        &mut self,
        dec: &mut EntropyDecoder<'_>,
        view: CoefRowsMut<'a>,
        n: usize,
    ) -> Result<(CoefRows<'a>, CoefRowsMut<'a>, u64)> {
        let before = dec.cursor().row_times_ns.len();
        let (band, rest) = dec.decode_band(view, n)?;
        let ns: u64 = dec.cursor().row_times_ns[before..].iter().sum();
        self.now += ns;
        self.report.huffman_ns += ns;
        Ok((band, rest, ns))
    }

    fn plan<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let (v, ns) = measure(f);
        self.now += ns;
        self.report.planning_ns += ns;
        v
    }

    fn host_run(&mut self, host: &HostLane<'_>, item: WorkItem<'_>, huffman_ns: u64) {
        let r = host.run(item, self.now);
        self.now = r.end_ns;
        self.report.host_parallel_ns += r.compute_ns;
        self.report.chunks.push(ChunkTrace { lane: LaneKind::Host, rows: r.rows.clone(), huffman_ns, report: r });
    }

    fn dispatched(&mut self, t: &Ticket) {
        self.report.first_dispatch_ns.get_or_insert(self.now);
        self.now += t.dispatch_ns();
        self.report.dispatch_ns += t.dispatch_ns();
    }

    fn collect(&mut self, pending: Vec<(Ticket, u64)>) -> Result<()> {
        for (t, huffman_ns) in pending {
            let r = t.wait()?;
            self.report.accel_compute_ns += r.compute_ns;
            self.report.transfer_ns += r.transfer_ns();
            self.report.accel_finish_ns = self.report.accel_finish_ns.max(r.end_ns);
            self.report.chunks.push(ChunkTrace { lane: LaneKind::Accelerator, rows: r.rows.clone(), huffman_ns, report: r });
        }
        Ok(())
    }

    fn host_only(
        &mut self,
        dec: &mut EntropyDecoder<'_>,
        host: &HostLane<'_>,
        kind: KernelKind,
        view: CoefRowsMut<'_>,
        out: &mut [u8],
    ) -> Result<()> {
        let n = view.row_count;
        let (band, _, huff) = self.huffman(dec, view, n)?;
        self.host_run(host, WorkItem::new(band, out, kind), huff);
        Ok(())
    }

    fn accelerated(
        &mut self,
        dec: &mut EntropyDecoder<'_>,
        ctx: &KernelContext,
        accel: LaneConfig,
        chunk_rows: usize,
        view: CoefRowsMut<'_>,
        out: &mut [u8],
    ) -> Result<()> {
        thread::scope(|s| {
            let mut lane = AcceleratorLane::spawn(s, ctx, accel)?;
            let (mut view, mut out) = (view, out);
            let mut pending = Vec::new();
            while view.row_count > 0 {
                let n = chunk_rows.min(view.row_count);
                let (band, rest, huff) = self.huffman(dec, view, n)?;
                view = rest;
                let o = take_bytes(&mut out, ctx.output_len(&band));
                let t = lane.submit(WorkItem::new(band, o, KernelKind::Fused), self.now)?;
                self.dispatched(&t);
                pending.push((t, huff));
            }
            self.collect(pending)?;
            lane.shutdown()
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn sps(
        &mut self,
        dec: &mut EntropyDecoder<'_>,
        ctx: &KernelContext,
        host: &HostLane<'_>,
        accel: LaneConfig,
        profile: &DeviceProfile,
        view: CoefRowsMut<'_>,
        out: &mut [u8],
    ) -> Result<()> {
        let g = ctx.geometry;
        let n = view.row_count;
        let (band, _, huff) = self.huffman(dec, view, n)?;
        let d = self.report.density;
        let plan = self.plan(|| solve_sps(profile, g.width, g.height, d));
        let (top, bottom) = band.split_at_row(plan.accel_mcu_rows().min(g.mcu_rows));
        self.report.plan = Some(plan);
        let (top_out, bottom_out) = out.split_at_mut(ctx.output_len(&top));
        thread::scope(|s| {
            let mut lane = AcceleratorLane::spawn(s, ctx, accel)?;
            let mut pending = Vec::new();
            if top.row_count > 0 {
                let t = lane.submit(WorkItem::new(top, top_out, KernelKind::Fused), self.now)?;
                self.dispatched(&t);
                pending.push((t, 0));
            }
            if bottom.row_count > 0 {
                self.host_run(host, WorkItem::new(bottom, bottom_out, KernelKind::Fused), huff);
            }
            self.collect(pending)?;
            lane.shutdown()
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn pps(
        &mut self,
        dec: &mut EntropyDecoder<'_>,
        ctx: &KernelContext,
        host: &HostLane<'_>,
        accel: LaneConfig,
        profile: &DeviceProfile,
        chunk_rows: usize,
        allow_repartition: bool,
        view: CoefRowsMut<'_>,
        out: &mut [u8],
    ) -> Result<()> {
        let g = ctx.geometry;
        let d = self.report.density;
        let mut profile = profile.clone();
        profile.chunk_rows = chunk_rows;
        let profile = &profile;
        let plan = self.plan(|| solve_pps(profile, g.width, g.height, d));
        let mut accel_mcu = plan.accel_mcu_rows().min(g.mcu_rows);
        self.report.plan = Some(plan);
        let estimated_total = estimate_huffman_time(profile, g.width, g.height, d);

        thread::scope(|s| {
            let mut lane = AcceleratorLane::spawn(s, ctx, accel)?;
            let (mut view, mut out) = (view, out);
            let mut pending = Vec::new();
            let mut decoded = 0usize;
            let mut predicted_free = 0.0f64;
            let mut repartitioned = !allow_repartition;
            while decoded < accel_mcu {
                let is_last = decoded + chunk_rows >= accel_mcu;
                if is_last && !repartitioned && decoded > 0 {
                    repartitioned = true;
                    let state = RepartitionState {
                        estimated_total_huff: estimated_total,
                        actual_huff_so_far: self.report.huffman_ns as f64,
                        rows_remaining: g.height - decoded * MCU_HEIGHT,
                        height: g.height,
                        density: d,
                        prev_gpu_remaining: (predicted_free - self.now as f64).max(0.0),
                    };
                    if let Ok((plan, density)) = self.plan(|| repartition(&state, profile, g.width)) {
                        accel_mcu = (decoded + plan.accel_mcu_rows()).min(g.mcu_rows);
                        self.report.repartition = Some(RepartitionRecord { at_row: decoded, state, density, plan });
                    }
                    continue;
                }
                let n = chunk_rows.min(accel_mcu - decoded);
                let (band, rest, huff) = self.huffman(dec, view, n)?;
                view = rest;
                decoded += n;
                let rows = g.pixel_rows(band.rows()).len();
                let o = take_bytes(&mut out, ctx.output_len(&band));
                let t = lane.submit(WorkItem::new(band, o, KernelKind::Fused), self.now)?;
                self.dispatched(&t);
                predicted_free = predicted_free.max(t.submitted_at_ns() as f64)
                    + profile.models.p_gpu.eval_clamped(&[g.width as f64, rows as f64]);
                pending.push((t, huff));
            }
            if view.row_count > 0 {
                let n = view.row_count;
                let (band, _, huff) = self.huffman(dec, view, n)?;
                self.host_run(host, WorkItem::new(band, out, KernelKind::Fused), huff);
            }
            self.collect(pending)?;
            lane.shutdown()
        })
    }
}
