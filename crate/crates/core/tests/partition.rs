mod support;

use hetjpeg::partition::{repartition, solve_pps, solve_sps, update_density, SolveMethod, MCU_HEIGHT};
use hetjpeg::perf::Models;
use hetjpeg::{DeviceProfile, Error, PartitionPlan, PolyModel, RepartitionState};
use support::{bilinear, linear_profile};

fn check_rows(plan: &PartitionPlan) {
    assert_eq!(plan.x_cpu_rows + plan.accel_rows, plan.height);
    assert!(plan.accel_rows.is_multiple_of(MCU_HEIGHT) || plan.x_cpu_rows == 0, "{plan:?}");
}

/// Per-pixel costs; Huffman costs `huff * d` per pixel.
fn profile(cpu: f64, gpu: f64, disp: f64, huff: f64, chunk: usize) -> DeviceProfile {
    DeviceProfile::new(
        Models {
            p_cpu: bilinear(0.0, 0.0, 0.0, cpu),
            p_gpu: bilinear(0.0, 0.0, 0.0, gpu),
            t_disp: PolyModel::constant(2, disp),
            t_huff_per_pixel: PolyModel::new(1, 1, vec![0.0, huff]).unwrap(),
        },
        chunk,
    )
}

#[test]
fn sps_matches_linear_closed_form() {
    for (cpu, gpu, disp, w, h) in [(2.0, 1.0, 0.0, 1, 300), (2.0, 1.0, 1_000.0, 100, 300), (1.0, 3.0, 5_000.0, 640, 480)] {
        let plan = solve_sps(&profile(cpu, gpu, disp, 0.0, 1), w, h, 0.5);
        let (w, hf) = (w as f64, h as f64);
        let closed = (gpu * w * hf - disp) / ((cpu + gpu) * w);
        assert!((plan.x_exact - closed).abs() < 1.0, "{} vs {closed}", plan.x_exact);
        assert_eq!(plan.method, SolveMethod::Newton);
        check_rows(&plan);
        assert!(plan.x_cpu_rows.abs_diff(closed.round() as usize) <= MCU_HEIGHT);
    }
}

#[test]
fn single_chunk_pps_without_huffman_is_sps() {
    let p = profile(2.0, 1.0, 700.0, 0.0, 64);
    let (sps, pps) = (solve_sps(&p, 320, 512, 0.3), solve_pps(&p, 320, 512, 0.3));
    assert!((sps.x_exact - pps.x_exact).abs() < 1e-6);
    assert_eq!((sps.x_cpu_rows, sps.accel_rows), (pps.x_cpu_rows, pps.accel_rows));
}

#[test]
fn single_chunk_pps_charges_host_rows_huffman() {
    // With one chunk the host decodes only its own rows after the dispatch:
    // f(x) = huff*w*x + cpu*w*x - gpu*w*(h-x).
    let (cpu, gpu, huff, w, h) = (2.0, 1.0, 3.0, 100.0, 400.0);
    let plan = solve_pps(&profile(cpu, gpu, 0.0, huff, 50), w as usize, h as usize, 1.0);
    let closed = gpu * h / (huff + cpu + gpu);
    assert!((plan.x_exact - closed).abs() < 1.0, "{} vs {closed}", plan.x_exact);
}

#[test]
fn huffman_bound_pps_sends_everything_to_the_accelerator() {
    let plan = solve_pps(&linear_profile(4.0, 0.5, 0.0, 40.0, 4), 512, 512, 1.0);
    assert_eq!(plan.x_cpu_rows, 0);
    assert_eq!(plan.accel_rows, 512);
    assert_eq!(plan.method, SolveMethod::Boundary);
}

#[test]
fn slow_accelerator_gets_the_smaller_share() {
    let plan = solve_pps(&linear_profile(1.0, 4.0, 0.0, 0.5, 4), 512, 512, 0.3);
    check_rows(&plan);
    assert!(plan.x_cpu_rows > 256, "{plan:?}");
    let sps = solve_sps(&linear_profile(1.0, 4.0, 0.0, 0.5, 4), 512, 512, 0.3);
    assert!(sps.x_cpu_rows > 256);
}

#[test]
fn ragged_heights_split_into_whole_mcus() {
    let p = profile(1.5, 1.0, 300.0, 1.0, 2);
    for h in [8, 9, 15, 17, 100, 333, 1001] {
        for plan in [solve_sps(&p, 77, h, 0.2), solve_pps(&p, 77, h, 0.2)] {
            assert_eq!(plan.height, h);
            check_rows(&plan);
            assert!((0.0..=h as f64).contains(&plan.x_exact));
        }
    }
}

/// State after the first `done` rows went to the accelerator exactly as
/// modeled.
fn on_schedule(p: &DeviceProfile, w: usize, h: usize, done: usize, d: f64) -> RepartitionState {
    let per_px = p.models.t_huff_per_pixel.eval(&[d]);
    let total = per_px * (w * h) as f64;
    RepartitionState {
        estimated_total_huff: total,
        actual_huff_so_far: total * done as f64 / h as f64,
        rows_remaining: h - done,
        height: h,
        density: d,
        prev_gpu_remaining: p.models.p_gpu.eval(&[w as f64, done as f64]),
    }
}

#[test]
fn on_schedule_repartition_keeps_the_plan() {
    let p = profile(2.0, 1.0, 0.0, 0.5, 8);
    let (w, h) = (256, 1024);
    let plan = solve_pps(&p, w, h, 0.4);
    let state = on_schedule(&p, w, h, plan.chunk_rows, 0.4);
    let (re, d2) = repartition(&state, &p, w).unwrap();
    assert!((d2 - 0.4).abs() < 1e-12);
    assert_eq!(re.height, h - plan.chunk_rows);
    check_rows(&re);
    assert!((re.x_exact - plan.x_exact).abs() < 1.0, "{} vs {}", re.x_exact, plan.x_exact);
}

#[test]
fn denser_remainder_moves_rows_to_the_accelerator() {
    let p = profile(2.0, 1.0, 0.0, 0.5, 8);
    let (w, h) = (256, 1024);
    let base = on_schedule(&p, w, h, 512, 1.0);
    // 40% of the estimate spent on half the rows leaves a ratio of 0.6.
    let dense = RepartitionState { actual_huff_so_far: 0.4 * base.estimated_total_huff, ..base };
    assert!((update_density(&dense).unwrap() - 1.2).abs() < 1e-12);
    let (a, _) = repartition(&base, &p, w).unwrap();
    let (b, d2) = repartition(&dense, &p, w).unwrap();
    assert!((d2 - 1.2).abs() < 1e-12);
    assert!(b.accel_rows > a.accel_rows, "{} vs {}", b.accel_rows, a.accel_rows);
}

#[test]
fn queued_accelerator_work_moves_rows_to_the_host() {
    let p = profile(2.0, 1.0, 0.0, 0.5, 8);
    let base = on_schedule(&p, 256, 1024, 256, 0.5);
    let mut last = 0.0;
    for scale in [0.0, 1.0, 4.0, 16.0] {
        let s = RepartitionState { prev_gpu_remaining: base.prev_gpu_remaining * scale, ..base };
        let (plan, _) = repartition(&s, &p, 256).unwrap();
        assert!(plan.x_exact >= last, "{} after {last}", plan.x_exact);
        last = plan.x_exact;
    }
    assert_eq!(last, 768.0);
}

#[test]
fn repartition_rejects_zero_estimate() {
    let p = profile(2.0, 1.0, 0.0, 0.0, 8);
    let s = RepartitionState {
        estimated_total_huff: 0.0,
        actual_huff_so_far: 0.0,
        rows_remaining: 8,
        height: 16,
        density: 0.5,
        prev_gpu_remaining: 0.0,
    };
    assert_eq!(repartition(&s, &p, 64).err(), Some(Error::ZeroEstimate));
}
