//! Execution lanes for the parallel phase.
//!
//! Time on both lanes is virtual. A lane with `worker_count` workers splits a
//! band into that many contiguous row groups, measures the CPU time of each
//! group on the thread that ran it, and charges the slowest group. The
//! accelerator lane then adds affine transfer costs on either side and keeps
//! its own device clock, so its timeline is independent of how many real
//! cores the process happens to get.

use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::{Scope, ScopedJoinHandle};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::buffer::CoefRows;
use crate::clock::{measure, thread_cpu_ns};
use crate::error::{Error, Result};
use crate::transform::{run_band, KernelContext, KernelKind};

/// `latency + bytes / bandwidth`, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCost {
    pub latency_ns: f64,
    pub bytes_per_ns: f64,
}

impl AffineCost {
    // Finite so it survives JSON; any real payload rounds to zero cost.
    pub const FREE: AffineCost = AffineCost { latency_ns: 0.0, bytes_per_ns: f64::MAX };

    pub fn cost_ns(&self, bytes: usize) -> u64 {
        if bytes == 0 {
            return 0;
        }
        (self.latency_ns + bytes as f64 / self.bytes_per_ns).round().max(0.0) as u64
    }
}

/// How a lane's compute time is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComputeCost {
    /// Measured CPU time of all groups, shared evenly over the workers as
    /// a work-conserving pool would.
    Measured,
    /// A fixed cost per output pixel; the kernels still run for their output.
    PerPixel { ns: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneConfig {
    pub worker_count: usize,
    pub transfer_write: AffineCost,
    pub transfer_read: AffineCost,
    /// Multiplier on compute time. 0.125 is a device eight times faster.
    pub throttle_factor: f64,
    pub compute: ComputeCost,
    /// Fixed host-side cost of one submit, on top of the measured enqueue.
    pub dispatch_ns: u64,
}

impl LaneConfig {
    pub fn host(worker_count: usize) -> Self {
        LaneConfig {
            worker_count,
            transfer_write: AffineCost::FREE,
            transfer_read: AffineCost::FREE,
            throttle_factor: 1.0,
            compute: ComputeCost::Measured,
            dispatch_ns: 0,
        }
    }

    /// Accelerator with `throttle` relative to a host lane of the same width
    /// and a PCIe-like link.
    pub fn accelerator(worker_count: usize, throttle: f64) -> Self {
        let link = AffineCost { latency_ns: 20_000.0, bytes_per_ns: 8.0 };
        LaneConfig {
            worker_count,
            transfer_write: link,
            transfer_read: link,
            throttle_factor: throttle,
            compute: ComputeCost::Measured,
            dispatch_ns: 5_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_cost = |c: &AffineCost| c.latency_ns >= 0.0 && c.bytes_per_ns > 0.0;
        let ok_compute = match self.compute {
            ComputeCost::Measured => true,
            ComputeCost::PerPixel { ns } => ns >= 0.0,
        };
        if self.worker_count == 0
            || self.throttle_factor.is_nan()
            || self.throttle_factor < 0.0
            || !ok_cost(&self.transfer_write)
            || !ok_cost(&self.transfer_read)
            || !ok_compute
        {
            return Err(Error::WorkerFailed(format!("invalid lane config {self:?}")));
        }
        Ok(())
    }
}

/// Host and accelerator configurations used together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lanes {
    pub host: LaneConfig,
    pub accel: LaneConfig,
}

impl Lanes {
    pub fn new(host_workers: usize, accel_throttle: f64) -> Self {
        Lanes { host: LaneConfig::host(host_workers), accel: LaneConfig::accelerator(host_workers, accel_throttle) }
    }

    /// Accelerator eight times faster per row than the host lane.
    pub fn fast_accelerator(host_workers: usize) -> Self {
        Lanes::new(host_workers, 0.125)
    }

    /// Accelerator at half the host lane's speed.
    pub fn slow_accelerator(host_workers: usize) -> Self {
        Lanes::new(host_workers, 2.0)
    }
}

impl Default for Lanes {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        Lanes::fast_accelerator(workers)
    }
}

/// A band of entropy-decoded rows and the output rows it fills.
#[derive(Debug)]
pub struct WorkItem<'a> {
    pub coefs: CoefRows<'a>,
    pub out: &'a mut [u8],
    pub kind: KernelKind,
}

impl<'a> WorkItem<'a> {
    pub fn new(coefs: CoefRows<'a>, out: &'a mut [u8], kind: KernelKind) -> Self {
        WorkItem { coefs, out, kind }
    }

    pub fn rows(&self) -> Range<usize> {
        self.coefs.rows()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TicketReport {
    /// MCU rows processed.
    pub rows: Range<usize>,
    pub pixels: usize,
    /// Virtual time the item reached the lane, after dispatch.
    pub submitted_at_ns: u64,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Host time spent submitting.
    pub dispatch_ns: u64,
    pub write_ns: u64,
    pub compute_ns: u64,
    pub read_ns: u64,
    /// Measured CPU time of each worker group.
    pub group_ns: Vec<u64>,
    /// Real elapsed time of the work on the lane.
    pub real_ns: u64,
}

impl TicketReport {
    pub fn transfer_ns(&self) -> u64 {
        self.write_ns + self.read_ns
    }

    /// Time from submission to completion.
    pub fn latency_ns(&self) -> u64 {
        self.end_ns - self.submitted_at_ns
    }
}

/// Runs `kind` over `coefs` split into `workers` contiguous row groups and
/// returns the CPU time of each group.
pub fn execute_band(
    ctx: &KernelContext,
    kind: KernelKind,
    coefs: CoefRows<'_>,
    out: &mut [u8],
    workers: usize,
) -> Vec<u64> {
    let groups = workers.max(1).min(coefs.row_count.max(1));
    let mut parts = Vec::with_capacity(groups);
    let (mut rest_c, mut rest_o) = (coefs, out);
    for g in 0..groups {
        let left = groups - g;
        let n = rest_c.row_count.div_ceil(left);
        let (c, tail_c) = rest_c.split_at_row(n);
        let bytes = ctx.output_len(&c);
        let (o, tail_o) = std::mem::take(&mut rest_o).split_at_mut(bytes);
        parts.push((c, o));
        rest_c = tail_c;
        rest_o = tail_o;
    }
    let run = |(c, o): (CoefRows<'_>, &mut [u8])| measure(|| run_band(ctx, kind, c, o)).1;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        parts.into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        parts.into_iter().map(run).collect()
    }
}

fn compute_cost(config: &LaneConfig, group_ns: &[u64], pixels: usize) -> u64 {
    let raw = match config.compute {
        ComputeCost::Measured => group_ns.iter().sum::<u64>() as f64 / config.worker_count as f64,
        ComputeCost::PerPixel { ns } => ns * pixels as f64 / config.worker_count as f64,
    };
    (raw * config.throttle_factor).round() as u64
}

fn pixels_of(ctx: &KernelContext, coefs: &CoefRows<'_>) -> usize {
    ctx.geometry.pixel_rows(coefs.rows()).len() * ctx.geometry.width
}

/// The host's own workers. Work runs synchronously on submit.
#[derive(Debug, Clone)]
pub struct HostLane<'c> {
    ctx: &'c KernelContext,
    config: LaneConfig,
}

impl<'c> HostLane<'c> {
    pub fn new(ctx: &'c KernelContext, config: LaneConfig) -> Result<Self> {
        config.validate()?;
        Ok(HostLane { ctx, config })
    }

    pub fn config(&self) -> &LaneConfig {
        &self.config
    }

    /// Runs `item` starting at virtual time `now_ns`.
    pub fn run(&self, item: WorkItem<'_>, now_ns: u64) -> TicketReport {
        let rows = item.rows();
        let pixels = pixels_of(self.ctx, &item.coefs);
        let t0 = Instant::now();
        let group_ns = if rows.is_empty() {
            Vec::new()
        } else {
            execute_band(self.ctx, item.kind, item.coefs, item.out, self.config.worker_count)
        };
        let compute_ns = compute_cost(&self.config, &group_ns, pixels);
        TicketReport {
            rows,
            pixels,
            submitted_at_ns: now_ns,
            start_ns: now_ns,
            end_ns: now_ns + compute_ns,
            compute_ns,
            group_ns,
            real_ns: t0.elapsed().as_nanos() as u64,
            ..Default::default()
        }
    }

    /// Same as [`HostLane::run`], through the ticket interface.
    pub fn submit(&self, item: WorkItem<'_>, now_ns: u64) -> Ticket {
        Ticket::ready(Ok(self.run(item, now_ns)), 0, now_ns)
    }
}

/// Completion handle for a submitted item.
#[derive(Debug)]
pub struct Ticket {
    rx: mpsc::Receiver<Result<TicketReport>>,
    dispatch_ns: u64,
    submitted_at_ns: u64,
}

impl Ticket {
    fn ready(report: Result<TicketReport>, dispatch_ns: u64, submitted_at_ns: u64) -> Ticket {
        let (tx, rx) = mpsc::channel();
        tx.send(report).expect("receiver is alive");
        Ticket { rx, dispatch_ns, submitted_at_ns }
    }

    /// Host time the submit cost. Known before completion.
    pub fn dispatch_ns(&self) -> u64 {
        self.dispatch_ns
    }

    pub fn submitted_at_ns(&self) -> u64 {
        self.submitted_at_ns
    }

    pub fn wait(self) -> Result<TicketReport> {
        self.rx.recv().map_err(|_| Error::WorkerFailed("accelerator lane exited".into()))?
    }
}

/// Blocks until every ticket completes. Reports come back in ticket order.
pub fn wait_all(tickets: impl IntoIterator<Item = Ticket>) -> Result<Vec<TicketReport>> {
    tickets.into_iter().map(Ticket::wait).collect()
}

struct Job<'a> {
    item: WorkItem<'a>,
    submitted_at_ns: u64,
    dispatch_ns: u64,
    reply: mpsc::Sender<Result<TicketReport>>,
}

/// Accelerator running on its own thread inside a [`std::thread::scope`].
/// Items are processed strictly in submission order. Row ranges of items
/// still in flight must be disjoint.
pub struct AcceleratorLane<'scope> {
    tx: Option<mpsc::Sender<Job<'scope>>>,
    handle: Option<ScopedJoinHandle<'scope, ()>>,
    config: LaneConfig,
    in_flight: Arc<Mutex<Vec<Range<usize>>>>,
}

impl<'scope> AcceleratorLane<'scope> {
    pub fn spawn<'env>(
        scope: &'scope Scope<'scope, 'env>,
        ctx: &'scope KernelContext,
        config: LaneConfig,
    ) -> Result<Self> {
        config.validate()?;
        let (tx, rx) = mpsc::channel::<Job<'scope>>();
        let in_flight = Arc::new(Mutex::new(Vec::new()));
        let done = Arc::clone(&in_flight);
        let handle = scope.spawn(move || {
            let mut device_free = 0u64;
            for job in rx {
                let rows = job.item.rows();
                let report = catch_unwind(AssertUnwindSafe(|| process(ctx, &config, job.item, job.submitted_at_ns, &mut device_free)))
                    .map(|mut r| {
                        r.dispatch_ns = job.dispatch_ns;
                        r
                    })
                    .map_err(|p| {
                        let msg = p
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| p.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "panic".into());
                        Error::WorkerFailed(msg)
                    });
                done.lock().unwrap_or_else(|e| e.into_inner()).retain(|r| *r != rows);
                let _ = job.reply.send(report);
            }
        });
        Ok(AcceleratorLane { tx: Some(tx), handle: Some(handle), config, in_flight })
    }

    pub fn config(&self) -> &LaneConfig {
        &self.config
    }

    /// Enqueues `item` at host time `now_ns` and returns without waiting.
    /// The item reaches the device at `now_ns + ticket.dispatch_ns()`.
    pub fn submit(&mut self, item: WorkItem<'scope>, now_ns: u64) -> Result<Ticket> {
        let t0 = thread_cpu_ns();
        let rows = item.rows();
        let tx = self.tx.as_ref().ok_or(Error::LaneShutDown)?;
        if !rows.is_empty() {
            let mut in_flight = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
            if in_flight.iter().any(|r| r.start < rows.end && rows.start < r.end) {
                return Err(Error::RowOverlap { start: rows.start, end: rows.end });
            }
            in_flight.push(rows.clone());
        }
        let (reply, rx) = mpsc::channel();
        let dispatch_ns = self.config.dispatch_ns + thread_cpu_ns().saturating_sub(t0);
        let submitted_at_ns = now_ns + dispatch_ns;
        if rows.is_empty() {
            let report = TicketReport {
                rows,
                submitted_at_ns,
                start_ns: submitted_at_ns,
                end_ns: submitted_at_ns,
                dispatch_ns,
                ..Default::default()
            };
            return Ok(Ticket::ready(Ok(report), dispatch_ns, submitted_at_ns));
        }
        tx.send(Job { item, submitted_at_ns, dispatch_ns, reply }).map_err(|_| Error::LaneShutDown)?;
        Ok(Ticket { rx, dispatch_ns, submitted_at_ns })
    }

    /// Stops accepting work, drains the queue and joins the thread.
    pub fn shutdown(&mut self) -> Result<()> {
        self.tx = None;
        if let Some(h) = self.handle.take() {
            h.join().map_err(|_| Error::WorkerFailed("accelerator thread panicked".into()))?;
        }
        Ok(())
    }
}

impl Drop for AcceleratorLane<'_> {
    fn drop(&mut self) {
        self.tx = None;
    }
}

fn process(
    ctx: &KernelContext,
    config: &LaneConfig,
    item: WorkItem<'_>,
    submitted_at_ns: u64,
    device_free: &mut u64,
) -> TicketReport {
    let rows = item.rows();
    let pixels = pixels_of(ctx, &item.coefs);
    let in_bytes = item.coefs.payload_bytes();
    let out_bytes = item.out.len();
    let t0 = Instant::now();
    let group_ns = execute_band(ctx, item.kind, item.coefs, item.out, config.worker_count);
    let real_ns = t0.elapsed().as_nanos() as u64;

    let write_ns = config.transfer_write.cost_ns(in_bytes);
    let compute_ns = compute_cost(config, &group_ns, pixels);
    let read_ns = config.transfer_read.cost_ns(out_bytes);
    let start_ns = submitted_at_ns.max(*device_free);
    let end_ns = start_ns + write_ns + compute_ns + read_ns;
    *device_free = end_ns;
    TicketReport {
        rows,
        pixels,
        submitted_at_ns,
        start_ns,
        end_ns,
        dispatch_ns: 0,
        write_ns,
        compute_ns,
        read_ns,
        group_ns,
        real_ns,
    }
}
