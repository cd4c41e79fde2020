//! Synthetic JPEG fixtures produced by an independent encoder.

use hetjpeg::Subsampling;
use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    /// Gradients and slow waves, sparse entropy data.
    Smooth,
    /// Smooth base with mid-amplitude grain.
    Textured,
    /// Uniform noise, the densest content.
    Noise,
    /// Hard-edged rectangles and discs.
    Shapes,
    /// Grain amplitude `top` above the middle row, `bottom` below it.
    SplitDensity { top: u8, bottom: u8 },
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub width: usize,
    pub height: usize,
    pub subsampling: Subsampling,
    pub quality: u8,
    pub restart: Option<u16>,
    pub pattern: Pattern,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(width: usize, height: usize, subsampling: Subsampling) -> Self {
        FixtureSpec { width, height, subsampling, quality: 85, restart: None, pattern: Pattern::Textured, seed: 1 }
    }

    pub fn pattern(mut self, p: Pattern) -> Self {
        self.pattern = p;
        self
    }

    pub fn quality(mut self, q: u8) -> Self {
        self.quality = q;
        self
    }

    pub fn restart(mut self, r: u16) -> Self {
        self.restart = Some(r);
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn name(&self) -> String {
        let s = match self.subsampling {
            Subsampling::S444 => "444",
            Subsampling::S422 => "422",
        };
        let p = match self.pattern {
            Pattern::Smooth => "smooth".to_string(),
            Pattern::Textured => "tex".to_string(),
            Pattern::Noise => "noise".to_string(),
            Pattern::Shapes => "shapes".to_string(),
            Pattern::SplitDensity { top, bottom } => format!("split{top}-{bottom}"),
        };
        let r = self.restart.map(|r| format!("_r{r}")).unwrap_or_default();
        format!("{}x{}_{s}_{p}_q{}{r}_s{}", self.width, self.height, self.quality, self.seed)
    }

    pub fn render(&self) -> Vec<u8> {
        render(self)
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_rgb(&self.render(), self.width, self.height, self.subsampling, self.quality, self.restart)
    }
}

pub fn encode_rgb(
    rgb: &[u8],
    width: usize,
    height: usize,
    subsampling: Subsampling,
    quality: u8,
    restart: Option<u16>,
) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = Encoder::new(&mut out, quality);
    enc.set_sampling_factor(match subsampling {
        Subsampling::S444 => SamplingFactor::R_4_4_4,
        Subsampling::S422 => SamplingFactor::R_4_2_2,
    });
    if let Some(r) = restart {
        enc.set_restart_interval(r);
    }
    enc.encode(rgb, width as u16, height as u16, ColorType::Rgb).expect("encode fixture");
    out
}

fn render(spec: &FixtureSpec) -> Vec<u8> {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phase: [f64; 3] = [rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0];
    let shapes: Vec<(f64, f64, f64, [u8; 3], bool)> = (0..12)
        .map(|_| {
            let cx = rng.random::<f64>() * w as f64;
            let cy = rng.random::<f64>() * h as f64;
            let r = (rng.random::<f64>() * 0.3 + 0.05) * w.max(h) as f64;
            (cx, cy, r, [rng.random(), rng.random(), rng.random()], rng.random())
        })
        .collect();

    let mut data = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64 / w.max(2) as f64, y as f64 / h.max(2) as f64);
            let mut px = [0f64; 3];
            for (c, v) in px.iter_mut().enumerate() {
                *v = 60.0 + 120.0 * (fx * (c as f64 + 1.0) * 0.7 + fy * 0.5)
                    + 30.0 * ((fx * 9.0 + phase[c]).sin() * (fy * 7.0 - phase[c]).cos());
            }
            let grain = match spec.pattern {
                Pattern::Smooth => 2.0,
                Pattern::Textured => 24.0,
                Pattern::Noise => 0.0,
                Pattern::Shapes => 4.0,
                Pattern::SplitDensity { top, bottom } => {
                    if y < h / 2 {
                        top as f64
                    } else {
                        bottom as f64
                    }
                }
            };
            match spec.pattern {
                Pattern::Noise => {
                    for v in &mut px {
                        *v = rng.random_range(0.0..256.0);
                    }
                }
                Pattern::Shapes => {
                    for &(cx, cy, r, color, disc) in &shapes {
                        let inside = if disc {
                            (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) < r * r
                        } else {
                            (x as f64 - cx).abs() < r && (y as f64 - cy).abs() < r * 0.6
                        };
                        if inside {
                            px = color.map(|c| c as f64);
                        }
                    }
                }
                _ => {}
            }
            let i = (y * w + x) * 3;
            for c in 0..3 {
                let n = if grain > 0.0 { rng.random_range(-grain..=grain) } else { 0.0 };
                data[i + c] = (px[c] + n).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    data
}

/// The shared fixture corpus: 51 images covering both subsamplings, sizes
/// from one MCU to 4096x4096, ragged edges, restart intervals and several
/// content types.
pub fn standard_corpus() -> Vec<FixtureSpec> {
    use Pattern::*;
    use Subsampling::*;
    let mut v = Vec::new();
    let sizes: [(usize, usize); 14] = [
        (8, 8),
        (16, 8),
        (9, 11),
        (17, 9),
        (31, 33),
        (64, 64),
        (100, 75),
        (127, 129),
        (256, 96),
        (320, 240),
        (333, 211),
        (640, 480),
        (801, 603),
        (1024, 768),
    ];
    let patterns = [Smooth, Textured, Noise, Shapes];
    for (i, &(w, h)) in sizes.iter().enumerate() {
        for (j, sub) in [S444, S422].into_iter().enumerate() {
            let p = patterns[(i + j) % patterns.len()];
            let q = [50, 75, 85, 95][(i * 2 + j) % 4];
            let mut s = FixtureSpec::new(w, h, sub).pattern(p).quality(q).seed((i * 2 + j) as u64);
            if (i + j) % 3 == 0 {
                s = s.restart([1, 3, 7, 16][i % 4]);
            }
            v.push(s);
        }
    }
    for (k, &(w, h)) in [(48, 40), (200, 160), (512, 512), (96, 300)].iter().enumerate() {
        for sub in [S444, S422] {
            for p in [Smooth, Noise] {
                v.push(FixtureSpec::new(w, h, sub).pattern(p).quality(90).seed(100 + k as u64));
            }
        }
    }
    v.push(FixtureSpec::new(4096, 8, S422).pattern(Textured).quality(85).seed(11));
    v.push(FixtureSpec::new(8, 600, S444).pattern(Noise).quality(70).seed(12).restart(5));
    v.push(FixtureSpec::new(1920, 1080, S444).pattern(Noise).quality(90).seed(13));
    v.push(FixtureSpec::new(2048, 1536, S422).pattern(Textured).quality(85).seed(7));
    v.push(FixtureSpec::new(1536, 2048, S444).pattern(Shapes).quality(80).seed(8).restart(64));
    v.push(FixtureSpec::new(4096, 4096, S422).pattern(Smooth).quality(85).seed(9));
    v.push(FixtureSpec::new(4096, 4096, S444).pattern(Textured).quality(75).seed(10));
    v
}

/// Smaller corpus for tests that decode every image many times.
pub fn quick_corpus() -> Vec<FixtureSpec> {
    standard_corpus().into_iter().filter(|s| s.width * s.height <= 320 * 240).collect()
}
