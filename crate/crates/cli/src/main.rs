use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use hetjpeg::lane::AffineCost;
use hetjpeg::perf::{run_profiling, ProfilingConfig};
use hetjpeg::pipeline::amdahl_bound;
use hetjpeg::{decode, parse_stream, DecodeOptions, DecodeReport, DeviceProfile, IdctKind, LaneConfig, Lanes, Mode, ParsedJpeg};

#[derive(Parser)]
#[command(name = "hetjpeg", version, about = "Baseline JPEG decoder with host/accelerator work partitioning")]
struct Cli {
    #[command(flatten)]
    lanes: LaneArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode one JPEG to a binary PPM and print the decode report.
    Decode(DecodeArgs),
    /// Fit a device profile from a directory of training JPEGs.
    Profile(ProfileArgs),
    /// Decode a corpus in several modes and write per-run timings as CSV.
    Bench(BenchArgs),
}

/// Lane settings. Unset values come from the profile's training lanes when
/// one is loaded, otherwise from the fast-accelerator defaults.
#[derive(Args)]
struct LaneArgs {
    #[arg(long, global = true, env = "HETJPEG_THREADS")]
    host_workers: Option<usize>,
    #[arg(long, global = true)]
    accel_workers: Option<usize>,
    /// Accelerator compute time relative to the host (0.125 = 8x faster).
    #[arg(long, global = true)]
    accel_throttle: Option<f64>,
    #[arg(long, global = true)]
    accel_latency_ns: Option<f64>,
    #[arg(long, global = true)]
    accel_bytes_per_ns: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdctArg {
    Fast,
    Direct,
}

#[derive(Args)]
struct DecodeArgs {
    input: PathBuf,
    #[arg(long, default_value = "par", value_parser = parse_mode)]
    mode: Mode,
    /// Device profile, required by sps and pps.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Output PPM path. Without it only the report is printed.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fast")]
    idct: IdctArg,
    /// Accelerator chunk height in MCU rows, overriding the profile.
    #[arg(long)]
    chunk_rows: Option<usize>,
    #[arg(long)]
    no_repartition: bool,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    train_dir: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Crop grid, widths x heights.
    #[arg(long, default_value = "8x8", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 7)]
    max_degree: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    corpus_dir: PathBuf,
    /// Comma-separated modes, in output order.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "seq,par,accel,accel-pipe,sps,pps")]
    modes: Vec<Mode>,
    #[arg(long)]
    profile: Option<PathBuf>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Decodes per (image, mode); the CSV gets one row per decode.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((w, h))
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn lanes(args: &LaneArgs, profile: Option<&DeviceProfile>) -> Lanes {
    let base = profile.and_then(|p| p.training_meta.lanes).unwrap_or_else(|| {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        Lanes::fast_accelerator(workers)
    });
    let host_workers = args.host_workers.unwrap_or(base.host.worker_count);
    let mut accel = base.accel;
    accel.worker_count = args.accel_workers.unwrap_or(if args.host_workers.is_some() {
        host_workers
    } else {
        accel.worker_count
    });
    if let Some(t) = args.accel_throttle {
        accel.throttle_factor = t;
    }
    for link in [&mut accel.transfer_write, &mut accel.transfer_read] {
        *link = AffineCost {
            latency_ns: args.accel_latency_ns.unwrap_or(link.latency_ns),
            bytes_per_ns: args.accel_bytes_per_ns.unwrap_or(link.bytes_per_ns),
        };
    }
    Lanes { host: LaneConfig { worker_count: host_workers, ..base.host }, accel }
}

fn load_profile(path: Option<&Path>) -> anyhow::Result<Option<DeviceProfile>> {
    path.map(|p| DeviceProfile::load(p).with_context(|| format!("loading profile {}", p.display()))).transpose()
}

fn read_jpeg(path: &Path) -> anyhow::Result<ParsedJpeg> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_stream(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// JPEG files directly inside `dir`, sorted by name.
fn jpeg_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("jpg" | "jpeg")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_decode(args: &DecodeArgs, lane_args: &LaneArgs) -> anyhow::Result<()> {
    if args.mode.needs_profile() && args.profile.is_none() {
        usage_error(format!("--mode {} requires --profile", args.mode));
    }
    let profile = load_profile(args.profile.as_deref())?;
    let lanes = lanes(lane_args, profile.as_ref());
    let parsed = read_jpeg(&args.input)?;
    let opts = DecodeOptions {
        idct: match args.idct {
            IdctArg::Fast => IdctKind::Fast,
            IdctArg::Direct => IdctKind::Direct,
        },
        chunk_rows: args.chunk_rows,
        repartition: !args.no_repartition,
    };
    let (pixels, report) = decode(&parsed, args.mode, profile.as_ref(), &lanes, &opts)?;
    if let Some(out) = &args.out {
        let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
        let mut w = io::BufWriter::new(file);
        pixels.write_ppm(&mut w)?;
        w.flush()?;
    }
    println!("{}", report.to_kv_line());
    Ok(())
}

fn cmd_profile(args: &ProfileArgs, lane_args: &LaneArgs) -> anyhow::Result<()> {
    let lanes = lanes(lane_args, None);
    let mut images = Vec::new();
    for path in jpeg_files(&args.train_dir)? {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        images.push((name, read_jpeg(&path)?));
    }
    let cfg = ProfilingConfig { grid: args.grid, max_degree: args.max_degree, repeats: args.repeats, ..ProfilingConfig::default() };
    let profile = run_profiling(&images, &lanes, &cfg)?;
    profile.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;

    println!("chunk_rows={} training_images={}", profile.chunk_rows, images.len());
    for (model, scores) in &profile.training_meta.aic {
        let best = scores
            .iter()
            .filter_map(|s| s.aic.map(|a| (s.degree, a)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(d, _)| d);
        let table: Vec<String> = scores
            .iter()
            .map(|s| match s.aic {
                Some(a) => format!("{}:{a:.1}", s.degree),
                None => format!("{}:singular", s.degree),
            })
            .collect();
        println!("{model} degree={} aic {}", best.map_or("-".into(), |d| d.to_string()), table.join(" "));
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const CSV_HEADER: &str = "image,w,h,d,mode,wall_ns,huff_ns,par_ns,x_rows,chunks,amdahl_bound";

fn csv_row(image: &str, r: &DecodeReport, bound: f64) -> String {
    format!(
        "{},{},{},{:.6},{},{},{},{},{},{},{:.4}",
        csv_field(image),
        r.width,
        r.height,
        r.density,
        r.mode,
        r.wall_ns,
        r.huffman_ns,
        r.host_parallel_ns,
        r.x_rows(),
        r.accel_chunks(),
        bound
    )
}

fn mean_cv(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, if mean != 0.0 { var.sqrt() / mean } else { 0.0 })
}

fn cmd_bench(args: &BenchArgs, lane_args: &LaneArgs) -> anyhow::Result<()> {
    if let Some(m) = args.modes.iter().find(|m| m.needs_profile()) {
        if args.profile.is_none() {
            usage_error(format!("mode {m} requires --profile"));
        }
    }
    let profile = load_profile(args.profile.as_deref())?;
    let lanes = lanes(lane_args, profile.as_ref());
    let files = jpeg_files(&args.corpus_dir)?;

    let mut out: Box<dyn Write> = match &args.csv {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(out, "{CSV_HEADER}")?;

    let opts = DecodeOptions::default();
    let mut speedups: Vec<Vec<f64>> = vec![Vec::new(); args.modes.len()];
    let mut failed = 0;
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let result = (|| -> anyhow::Result<()> {
            let parsed = read_jpeg(path)?;
            // Host-parallel is the reference for speedups and the bound.
            let (_, reference) = decode(&parsed, Mode::HostParallel, profile.as_ref(), &lanes, &opts)?;
            let bound = amdahl_bound(&reference)?;
            let mut rows = Vec::new();
            let mut walls: Vec<Vec<f64>> = vec![Vec::new(); args.modes.len()];
            for _ in 0..args.repeats.max(1) {
                for (i, &mode) in args.modes.iter().enumerate() {
                    let (_, r) = decode(&parsed, mode, profile.as_ref(), &lanes, &opts)?;
                    walls[i].push(r.wall_ns as f64);
                    rows.push((i, csv_row(&name, &r, bound)));
                }
            }
            rows.sort_by_key(|(i, _)| *i);
            for (_, row) in rows {
                writeln!(out, "{row}")?;
            }
            for (i, w) in walls.iter().enumerate() {
                speedups[i].push(reference.wall_ns as f64 / (w.iter().sum::<f64>() / w.len() as f64));
            }
            Ok(())
        })();
        if let Err(e) = result {
            eprintln!("{name}: {e:#}");
            failed += 1;
        }
    }
    out.flush()?;
    drop(out);

    let summary = |line: String| {
        if args.csv.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    summary(format!("{:<12} {:>8} {:>8} {:>7}", "mode", "speedup", "cv", "images"));
    for (mode, s) in args.modes.iter().zip(&speedups) {
        if s.is_empty() {
            continue;
        }
        let (mean, cv) = mean_cv(s);
        summary(format!("{:<12} {:>8.3} {:>8.3} {:>7}", mode.name(), mean, cv, s.len()));
    }
    if failed > 0 {
        bail!("{failed} of {} images failed", files.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decode(a) => cmd_decode(a, &cli.lanes),
        Command::Profile(a) => cmd_profile(a, &cli.lanes),
        Command::Bench(a) => cmd_bench(a, &cli.lanes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let insufficient = e
                .downcast_ref::<hetjpeg::Error>()
                .is_some_and(|e| matches!(e, hetjpeg::Error::InsufficientSamples(_)));
            ExitCode::from(if insufficient { 3 } else { 1 })
        }
    }
}
