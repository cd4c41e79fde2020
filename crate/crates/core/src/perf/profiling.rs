use std::collections::BTreeMap;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use super::fit::fit_poly;
use super::profile::{DeviceProfile, Models, TrainingImage, TrainingMeta, PROFILE_VERSION};
use super::{entropy_density, MAX_DEGREE};
use crate::buffer::CoefficientBuffer;
use crate::clock::prefault;
use crate::entropy::EntropyDecoder;
use crate::error::{Error, Result};
use crate::lane::{AcceleratorLane, HostLane, Lanes, WorkItem};
use crate::parser::{ParsedJpeg, Subsampling};
use crate::pipeline::{decode, DecodeOptions, Mode};
use crate::transform::{IdctKind, KernelContext, KernelKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilingConfig {
    /// Crop grid, widths x heights.
    pub grid: (usize, usize),
    pub max_degree: usize,
    /// Sweeps per measurement. Grid costs keep the fastest sample, Huffman
    /// times the median.
    pub repeats: usize,
    pub min_training_images: usize,
    pub idct: IdctKind,
    pub calibrate_chunks: bool,
    /// At most this many of the largest images are used for chunk calibration.
    pub calibration_images: usize,
    pub device_description: String,
}

impl Default for ProfilingConfig {
    fn default() -> Self {
        ProfilingConfig {
            grid: (8, 8),
            max_degree: MAX_DEGREE,
            repeats: 5,
            min_training_images: 8,
            idct: IdctKind::Fast,
            calibrate_chunks: true,
            calibration_images: 3,
            device_description: "simulated accelerator".into(),
        }
    }
}

fn huffman_ns(parsed: &ParsedJpeg, out: &mut CoefficientBuffer) -> Result<u64> {
    let mut dec = EntropyDecoder::new(parsed)?;
    let n = dec.rows_remaining();
    dec.decode_rows(out, n)?;
    Ok(dec.cursor().total_time_ns())
}

/// `n` evenly spaced sizes from one MCU (`mcu`) to `full`, rounded to whole
/// MCUs except for `full` itself, deduplicated. Starting at one MCU keeps
/// the fitted models honest near empty shares; whole MCUs match the bands
/// the schedules actually run.
fn steps(full: usize, mcu: usize, n: usize) -> Vec<usize> {
    let min = mcu.min(full).max(1);
    if n <= 1 {
        return vec![full];
    }
    let mut v: Vec<usize> = (0..n)
        .map(|i| {
            let s = min + (full - min) * i / (n - 1);
            if i + 1 == n { full } else { ((s + min / 2) / min * min).clamp(min, full) }
        })
        .collect();
    v.dedup();
    v
}

#[derive(Clone, Copy)]
struct GridSample {
    w: usize,
    h: usize,
    p_cpu: u64,
    p_gpu: u64,
    t_disp: u64,
}

impl GridSample {
    fn min(self, o: GridSample) -> GridSample {
        GridSample { p_cpu: self.p_cpu.min(o.p_cpu), p_gpu: self.p_gpu.min(o.p_gpu), t_disp: self.t_disp.min(o.t_disp), ..self }
    }
}

/// One host run and one accelerator run over a crop, back to back so both
/// see the same machine state.
fn measure_crop(source: &ParsedJpeg, coefs: &CoefficientBuffer, lanes: &Lanes, cfg: &ProfilingConfig) -> Result<GridSample> {
    let g = coefs.geometry;
    let mut ctx = KernelContext::new(source, cfg.idct);
    ctx.geometry = g;
    let out_len = g.width * g.height * 3;
    let host = HostLane::new(&ctx, lanes.host)?;
    let (mut a, mut b) = (vec![0u8; out_len], vec![0u8; out_len]);
    prefault(&mut a);
    prefault(&mut b);
    let p_cpu = host.run(WorkItem::new(coefs.rows(), &mut a, KernelKind::Fused), 0).compute_ns;
    let (p_gpu, t_disp) = thread::scope(|s| -> Result<(u64, u64)> {
        let mut lane = AcceleratorLane::spawn(s, &ctx, lanes.accel)?;
        let t = lane.submit(WorkItem::new(coefs.rows(), &mut b, KernelKind::Fused), 0)?;
        let disp = t.dispatch_ns();
        let r = t.wait()?;
        lane.shutdown()?;
        Ok((r.latency_ns(), disp))
    })?;
    Ok(GridSample { w: g.width, h: g.height, p_cpu, p_gpu, t_disp })
}

/// Profiles the lanes on `images` and fits the four cost models.
pub fn run_profiling(images: &[(String, ParsedJpeg)], lanes: &Lanes, cfg: &ProfilingConfig) -> Result<DeviceProfile> {
    if images.len() < cfg.min_training_images.max(3) {
        return Err(Error::InsufficientSamples(format!(
            "{} training images, at least {} required",
            images.len(),
            cfg.min_training_images.max(3)
        )));
    }
    lanes.host.validate()?;
    lanes.accel.validate()?;

    // Huffman time per pixel against density, one sample per image.
    let mut meta_images = Vec::new();
    let mut bufs = Vec::new();
    for (name, parsed) in images {
        let g = parsed.geometry();
        let d = entropy_density(parsed.file_size, g.width, g.height)?;
        let mut buf = CoefficientBuffer::new(g);
        for plane in [&mut buf.y, &mut buf.cb, &mut buf.cr] {
            prefault(plane);
        }
        bufs.push(buf);
        meta_images.push(TrainingImage { name: name.clone(), width: g.width, height: g.height, density: d });
    }
    let repeats = cfg.repeats.max(1);
    let mut huff: Vec<Vec<u64>> = vec![Vec::with_capacity(repeats); images.len()];
    let mut huff_sweep = |bufs: &mut [CoefficientBuffer]| -> Result<()> {
        for (i, (_, parsed)) in images.iter().enumerate() {
            huff[i].push(huffman_ns(parsed, &mut bufs[i])?);
        }
        Ok(())
    };
    huff_sweep(&mut bufs)?;

    // Largest image of each subsampling.
    let mut largest: BTreeMap<Subsampling, usize> = BTreeMap::new();
    for (i, (_, parsed)) in images.iter().enumerate() {
        let area = |j: usize| images[j].1.width * images[j].1.height;
        match largest.get(&parsed.subsampling) {
            Some(&j) if area(j) >= area(i) => {}
            _ => {
                largest.insert(parsed.subsampling, i);
            }
        }
    }

    // Parallel-phase costs on a grid of crops of each largest image. Huffman
    // sweeps are interleaved so its samples span the whole profiling run.
    let mut sizes: BTreeMap<Subsampling, Vec<(usize, usize)>> = BTreeMap::new();
    for (&sub, &i) in &largest {
        let g = bufs[i].geometry;
        let v = sizes.entry(sub).or_default();
        for &w in &steps(g.width, g.mcu_width, cfg.grid.0) {
            for &h in &steps(g.height, g.mcu_height, cfg.grid.1) {
                v.push((w, h));
            }
        }
    }
    let mut grids: BTreeMap<Subsampling, Vec<Option<GridSample>>> =
        sizes.iter().map(|(&sub, v)| (sub, vec![None; v.len()])).collect();
    for r in 0..repeats {
        for (&sub, &i) in &largest {
            let grid = grids.get_mut(&sub).expect("grid per subsampling");
            for (k, &(w, h)) in sizes[&sub].iter().enumerate() {
                let s = measure_crop(&images[i].1, &bufs[i].crop(w, h), lanes, cfg)?;
                grid[k] = Some(grid[k].map_or(s, |g| g.min(s)));
            }
        }
        if r + 1 < repeats {
            huff_sweep(&mut bufs)?;
        }
    }

    let huff_samples: Vec<(Vec<f64>, f64)> = huff
        .iter_mut()
        .zip(&meta_images)
        .map(|(t, m)| {
            t.sort_unstable();
            (vec![m.density], t[t.len() / 2] as f64 / (m.width * m.height) as f64)
        })
        .collect();
    let huff_degree = cfg.max_degree.min(huff_samples.len() - 2);
    let huff_fit = fit_poly(&huff_samples, huff_degree).map_err(|e| match e {
        Error::SingularFit(m) => Error::InsufficientSamples(format!("huffman model: {m}")),
        e => e,
    })?;
    let mut aic = BTreeMap::new();
    aic.insert("t_huff_per_pixel".to_string(), huff_fit.scores);

    let mut by_subsampling = BTreeMap::new();
    for (sub, grid) in grids {
        let grid: Vec<GridSample> = grid.into_iter().flatten().collect();
        let wh = |s: &GridSample| vec![s.w as f64, s.h as f64];
        let fit = |f: fn(&GridSample) -> u64| {
            fit_poly(&grid.iter().map(|s| (wh(s), f(s) as f64)).collect::<Vec<_>>(), cfg.max_degree)
        };
        let p_cpu = fit(|s| s.p_cpu)?;
        let p_gpu = fit(|s| s.p_gpu)?;
        let t_disp = fit(|s| s.t_disp)?;
        let tag = match sub {
            Subsampling::S444 => "444",
            Subsampling::S422 => "422",
        };
        aic.insert(format!("p_cpu_{tag}"), p_cpu.scores);
        aic.insert(format!("p_gpu_{tag}"), p_gpu.scores);
        aic.insert(format!("t_disp_{tag}"), t_disp.scores);
        let models = Models {
            p_cpu: p_cpu.model,
            p_gpu: p_gpu.model,
            t_disp: t_disp.model,
            t_huff_per_pixel: huff_fit.model.clone(),
        };
        by_subsampling.insert(sub, models);
    }
    let (primary_sub, &primary_idx) = largest
        .iter()
        .max_by_key(|(_, &i)| images[i].1.width * images[i].1.height)
        .expect("at least one image");
    let largest_rows = images[primary_idx].1.geometry().mcu_rows;

    let mut profile = DeviceProfile {
        version: PROFILE_VERSION,
        device_description: cfg.device_description.clone(),
        models: by_subsampling[primary_sub].clone(),
        transfer: lanes.accel.transfer_write,
        chunk_rows: largest_rows,
        by_subsampling,
        training_meta: TrainingMeta {
            images: meta_images,
            grid: cfg.grid,
            max_degree: cfg.max_degree,
            repeats: cfg.repeats,
            aic,
            chunk_bests: Vec::new(),
            lanes: Some(*lanes),
            fitted_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        },
    };

    if cfg.calibrate_chunks {
        let mut order: Vec<&ParsedJpeg> = images.iter().map(|(_, p)| p).collect();
        order.sort_by_key(|p| std::cmp::Reverse(p.width * p.height));
        let mut large: Vec<&ParsedJpeg> = order.iter().copied().filter(|p| p.geometry().mcu_rows >= 8).collect();
        if large.is_empty() {
            large.push(order[0]);
        }
        large.truncate(cfg.calibration_images.max(1));
        let (rows, bests) = calibrate_chunk_size(&large, lanes, cfg.repeats.min(3), cfg.idct)?;
        profile.chunk_rows = rows;
        profile.training_meta.chunk_bests = bests;
    }
    Ok(profile)
}

/// Largest of the per-image best chunk heights.
pub fn select_chunk_rows(bests: &[usize]) -> usize {
    bests.iter().copied().max().unwrap_or(1)
}

/// Times pipelined decodes at chunk heights of the full image height and
/// every power of two below it, keeps each image's fastest, and returns the
/// largest of those along with the per-image bests (MCU rows).
pub fn calibrate_chunk_size(
    images: &[&ParsedJpeg],
    lanes: &Lanes,
    repeats: usize,
    idct: IdctKind,
) -> Result<(usize, Vec<usize>)> {
    let candidates: Vec<Vec<usize>> = images
        .iter()
        .map(|parsed| {
            let full = parsed.geometry().mcu_rows;
            let mut v = vec![full];
            let mut c = full.next_power_of_two();
            while c > 1 {
                c /= 2;
                if c < full {
                    v.push(c);
                }
            }
            v
        })
        .collect();
    let mut walls: Vec<Vec<u64>> = candidates.iter().map(|c| vec![u64::MAX; c.len()]).collect();
    for _ in 0..repeats.max(1) {
        for (i, parsed) in images.iter().enumerate() {
            for (k, &c) in candidates[i].iter().enumerate() {
                let opts = DecodeOptions { idct, chunk_rows: Some(c), repartition: false };
                let wall = decode(parsed, Mode::PipelinedAccelerator, None, lanes, &opts)?.1.wall_ns;
                walls[i][k] = walls[i][k].min(wall);
            }
        }
    }
    let bests: Vec<usize> = candidates
        .iter()
        .zip(&walls)
        .map(|(c, w)| {
            let k = (0..c.len()).min_by_key(|&k| (w[k], std::cmp::Reverse(c[k]))).expect("at least one candidate");
            c[k]
        })
        .collect();
    Ok((select_chunk_rows(&bests), bests))
}
