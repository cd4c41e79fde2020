mod support;

use hetjpeg::lane::{AffineCost, ComputeCost};
use hetjpeg::perf::{calibrate_chunk_size, run_profiling, ProfilingConfig};
use hetjpeg::{DeviceProfile, Error, IdctKind, LaneConfig, Lanes, Subsampling};
use support::corpus::{FixtureSpec, Pattern};
use support::{training_set, Fixture};

const LINK: AffineCost = AffineCost { latency_ns: 2_000.0, bytes_per_ns: 4.0 };
const NS_PER_PIXEL: f64 = 3.0;
const WORKERS: usize = 2;

fn synthetic_lanes() -> Lanes {
    Lanes {
        host: LaneConfig::host(WORKERS),
        accel: LaneConfig {
            worker_count: WORKERS,
            transfer_write: LINK,
            transfer_read: LINK,
            throttle_factor: 1.0,
            compute: ComputeCost::PerPixel { ns: NS_PER_PIXEL },
            dispatch_ns: 20_000,
        },
    }
}

fn quick() -> ProfilingConfig {
    ProfilingConfig { repeats: 1, calibrate_chunks: false, ..ProfilingConfig::default() }
}

/// Accelerator latency of a `w x h` crop: coefficients in, pixels out,
/// per-pixel compute shared by the workers.
fn analytic_p_gpu(sub: Subsampling, w: usize, h: usize) -> f64 {
    let blocks = match sub {
        Subsampling::S444 => w.div_ceil(8) * h.div_ceil(8) * 3,
        Subsampling::S422 => w.div_ceil(16) * h.div_ceil(8) * 4,
    };
    let write = LINK.latency_ns + (blocks * 128) as f64 / LINK.bytes_per_ns;
    let read = LINK.latency_ns + (w * h * 3) as f64 / LINK.bytes_per_ns;
    write + NS_PER_PIXEL * (w * h) as f64 / WORKERS as f64 + read
}

/// Whole-MCU sizes from one MCU to `full`.
fn crop_steps(full: usize, mcu: usize) -> Vec<usize> {
    (1..=full / mcu).step_by(3).map(|k| k * mcu).collect()
}

#[test]
fn fitted_accelerator_cost_matches_configured_lane() {
    let images = training_set(256);
    let profile = run_profiling(&images, &synthetic_lanes(), &quick()).unwrap();
    for (sub, mcu_w) in [(Subsampling::S444, 8), (Subsampling::S422, 16)] {
        let m = profile.models_for(sub);
        for w in crop_steps(256, mcu_w) {
            for h in crop_steps(256, 8) {
                let want = analytic_p_gpu(sub, w, h);
                let got = m.p_gpu.eval(&[w as f64, h as f64]);
                assert!((got - want).abs() <= 0.02 * want, "{sub:?} {w}x{h}: fitted {got:.0}, lane {want:.0}");
            }
        }
    }
}

#[test]
fn accelerator_models_are_reproducible() {
    let images = training_set(256);
    let lanes = synthetic_lanes();
    let a = run_profiling(&images, &lanes, &quick()).unwrap();
    let b = run_profiling(&images, &lanes, &quick()).unwrap();
    for sub in [Subsampling::S444, Subsampling::S422] {
        let (ma, mb) = (a.models_for(sub), b.models_for(sub));
        // Accelerator samples are virtual, so the fit sees identical data.
        assert_eq!(ma.p_gpu, mb.p_gpu);
        for w in (16..=256).step_by(60) {
            for h in (8..=256).step_by(62) {
                let x = [w as f64, h as f64];
                let (ga, gb) = (ma.p_gpu.eval(&x), mb.p_gpu.eval(&x));
                assert!((ga - gb).abs() <= 0.1 * ga.max(gb), "p_gpu {w}x{h}: {ga} vs {gb}");
                let (da, db) = (ma.t_disp.eval(&x), mb.t_disp.eval(&x));
                assert!((da - db).abs() <= 0.1 * da.max(db), "t_disp {w}x{h}: {da} vs {db}");
            }
        }
    }
}

#[test]
fn profile_records_training_metadata_and_round_trips() {
    let images = training_set(128);
    let lanes = synthetic_lanes();
    let profile = run_profiling(&images, &lanes, &quick()).unwrap();
    let meta = &profile.training_meta;
    assert_eq!(meta.images.len(), images.len());
    assert_eq!(meta.lanes, Some(lanes));
    for key in ["t_huff_per_pixel", "p_cpu_444", "p_gpu_422", "t_disp_422"] {
        let scores = &meta.aic[key];
        assert!(!scores.is_empty(), "{key}");
        let chosen = if key == "t_huff_per_pixel" {
            profile.models.t_huff_per_pixel.degree
        } else {
            let sub = if key.ends_with("444") { Subsampling::S444 } else { Subsampling::S422 };
            let m = profile.models_for(sub);
            match &key[..5] {
                "p_cpu" => m.p_cpu.degree,
                "p_gpu" => m.p_gpu.degree,
                _ => m.t_disp.degree,
            }
        };
        let best = scores.iter().filter(|s| s.aic.is_some()).min_by(|a, b| a.aic.partial_cmp(&b.aic).unwrap()).unwrap();
        assert_eq!(best.degree, chosen, "{key}");
    }
    assert!(profile.models.t_huff_per_pixel.eval(&[0.5]) > 0.0);

    let back = DeviceProfile::from_json(&profile.to_json()).unwrap();
    assert_eq!(back, profile);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.json");
    profile.save(&path).unwrap();
    assert_eq!(DeviceProfile::load(&path).unwrap(), profile);
}

#[test]
fn too_few_training_images_are_rejected() {
    let images = training_set(64);
    for n in [2, 7] {
        let r = run_profiling(&images[..n], &synthetic_lanes(), &quick());
        assert!(matches!(r, Err(Error::InsufficientSamples(_))), "{n} images: {r:?}");
    }
}

#[test]
fn fast_accelerator_prefers_chunks_below_full_height() {
    let f = Fixture::new(FixtureSpec::new(512, 512, Subsampling::S422).pattern(Pattern::Textured).seed(3));
    let parsed = f.parsed();
    let (rows, bests) = calibrate_chunk_size(&[&parsed], &Lanes::fast_accelerator(WORKERS), 3, IdctKind::Fast).unwrap();
    assert_eq!(bests.len(), 1);
    assert_eq!(rows, bests[0]);
    assert!(rows < parsed.geometry().mcu_rows, "best chunk {rows} of {}", parsed.geometry().mcu_rows);
    assert!(rows.is_power_of_two());
}
