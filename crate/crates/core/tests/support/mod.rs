#![allow(dead_code)]

pub mod corpus;
pub mod oracle;

use std::sync::OnceLock;

use corpus::{FixtureSpec, Pattern};
use hetjpeg::perf::{Models, ProfilingConfig};
use hetjpeg::{parse_stream, DeviceProfile, Lanes, ParsedJpeg, PolyModel, Subsampling};

pub struct Fixture {
    pub name: String,
    pub spec: FixtureSpec,
    pub bytes: Vec<u8>,
}

impl Fixture {
    pub fn new(spec: FixtureSpec) -> Self {
        Fixture { name: spec.name(), bytes: spec.encode(), spec }
    }

    pub fn parsed(&self) -> ParsedJpeg {
        parse_stream(&self.bytes).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }

    pub fn pixels(&self) -> usize {
        self.spec.width * self.spec.height
    }
}

/// The standard corpus, encoded once per test binary.
pub fn corpus() -> &'static [Fixture] {
    static CORPUS: OnceLock<Vec<Fixture>> = OnceLock::new();
    CORPUS.get_or_init(|| corpus::standard_corpus().into_iter().map(Fixture::new).collect())
}

pub fn quick_corpus() -> Vec<Fixture> {
    corpus::quick_corpus().into_iter().map(Fixture::new).collect()
}

/// Affine model `a + b*w + c*h + e*w*h`, identity normalization.
pub fn bilinear(a: f64, b: f64, c: f64, e: f64) -> PolyModel {
    // Order: (0,0), (0,1), (0,2), (1,0), (1,1), (2,0) for degree 2.
    PolyModel::new(2, 2, vec![a, c, 0.0, b, e, 0.0]).unwrap()
}

/// Cost models with every time proportional to pixel count.
pub fn linear_profile(cpu_ns_px: f64, gpu_ns_px: f64, gpu_fixed_ns: f64, huff_ns_px: f64, chunk_rows: usize) -> DeviceProfile {
    DeviceProfile::new(
        Models {
            p_cpu: bilinear(0.0, 0.0, 0.0, cpu_ns_px),
            p_gpu: bilinear(gpu_fixed_ns, 0.0, 0.0, gpu_ns_px),
            t_disp: PolyModel::constant(2, 1_000.0),
            t_huff_per_pixel: PolyModel::new(1, 0, vec![huff_ns_px]).unwrap(),
        },
        chunk_rows,
    )
}

/// Twelve training images spanning densities, sized up to `side` x `side`.
pub fn training_set(side: usize) -> Vec<(String, ParsedJpeg)> {
    let patterns = [Pattern::Smooth, Pattern::Textured, Pattern::Shapes, Pattern::Noise];
    let qualities = [40u8, 60, 75, 85, 90, 95];
    (0..12)
        .map(|i| {
            let sub = if i % 2 == 0 { Subsampling::S422 } else { Subsampling::S444 };
            let dim = if i == 0 { side } else { side >> (i % 3) };
            let spec = FixtureSpec::new(dim, dim, sub)
                .pattern(patterns[i % 4])
                .quality(qualities[i % 6])
                .seed(500 + i as u64);
            let f = Fixture::new(spec);
            (f.name.clone(), f.parsed())
        })
        .collect()
}

pub fn quick_profiling_config() -> ProfilingConfig {
    ProfilingConfig { calibration_images: 2, ..ProfilingConfig::default() }
}

/// Profile fitted on [`training_set`] for `lanes`.
pub fn fitted_profile(lanes: &Lanes, side: usize) -> DeviceProfile {
    hetjpeg::perf::run_profiling(&training_set(side), lanes, &quick_profiling_config()).expect("profiling")
}
