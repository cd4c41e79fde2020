//! Polynomial cost models, their fitting, and the offline profiler that
//! produces a [`DeviceProfile`].

mod fit;
mod poly;
mod profile;
mod profiling;

pub use fit::{fit_degree, fit_poly, DegreeScore, FitReport};
pub use poly::{monomial_count, monomials, PolyModel, MAX_DEGREE};
pub use profile::{DeviceProfile, Models, TrainingImage, TrainingMeta, PROFILE_VERSION};
pub use profiling::{calibrate_chunk_size, run_profiling, select_chunk_rows, ProfilingConfig};

use crate::error::{Error, Result};

/// Compressed bytes per pixel.
pub fn entropy_density(file_size: usize, width: usize, height: usize) -> Result<f64> {
    if width == 0 || height == 0 {
        return Err(Error::ZeroArea);
    }
    if file_size == 0 {
        return Err(Error::ZeroDensity);
    }
    Ok(file_size as f64 / (width as f64 * height as f64))
}

/// Predicted Huffman time in ns for a `width x height` region of density
/// `d`, assuming entropy data is spread evenly over the image.
pub fn estimate_huffman_time(profile: &DeviceProfile, width: usize, height: usize, d: f64) -> f64 {
    (profile.models.t_huff_per_pixel.eval(&[d]) * width as f64 * height as f64).max(0.0)
}
