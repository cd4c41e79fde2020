//! Per-thread CPU clock.
//!
//! Lane timelines are assembled from the CPU time each piece of work
//! consumed on the thread that ran it, so the simulated devices keep their
//! relative speeds even when the host has fewer cores than lanes.

/// CPU time consumed by the calling thread, in nanoseconds.
pub fn thread_cpu_ns() -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid out-pointer and the clock id is a constant
    // supported on every Linux and macOS target.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    debug_assert_eq!(rc, 0);
    ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64
}

/// Runs `f` and returns its result with the CPU time it took on this thread.
#[inline]
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = thread_cpu_ns();
    let out = f();
    (out, thread_cpu_ns().saturating_sub(start))
}

/// Touches every page of `buf` so first-use page faults are not charged to
/// whichever timed stage writes it first.
pub fn prefault<T: Copy>(buf: &mut [T]) {
    let stride = (4096 / std::mem::size_of::<T>().max(1)).max(1);
    for i in (0..buf.len()).step_by(stride) {
        let p: *mut T = &mut buf[i];
        // SAFETY: `p` points at an initialized element of `buf`, which we
        // hold exclusively; the value written back is the value read.
        unsafe { p.write_volatile(p.read_volatile()) };
    }
}
