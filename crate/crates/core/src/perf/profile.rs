use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::DegreeScore;
use super::poly::PolyModel;
use crate::error::{Error, Result};
use crate::lane::{AffineCost, Lanes};
use crate::parser::Subsampling;

pub const PROFILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    /// Host parallel phase, `(w, h)` to ns.
    pub p_cpu: PolyModel,
    /// Accelerator parallel phase including transfers, `(w, h)` to ns.
    pub p_gpu: PolyModel,
    /// Host-side dispatch cost, `(w, h)` to ns.
    pub t_disp: PolyModel,
    /// Huffman time per pixel as a function of entropy density.
    pub t_huff_per_pixel: PolyModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingImage {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub density: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingMeta {
    pub images: Vec<TrainingImage>,
    /// Crop grid, widths x heights.
    pub grid: (usize, usize),
    pub max_degree: usize,
    pub repeats: usize,
    /// AIC of every candidate degree, per model.
    pub aic: BTreeMap<String, Vec<DegreeScore>>,
    /// Best chunk height of each calibration image, in MCU rows.
    pub chunk_bests: Vec<usize>,
    pub lanes: Option<Lanes>,
    /// Seconds since the Unix epoch when fitting finished.
    pub fitted_at: u64,
}

/// Fitted cost models for one host/accelerator pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub version: u32,
    pub device_description: String,
    pub models: Models,
    pub transfer: AffineCost,
    /// Accelerator chunk height in MCU rows.
    pub chunk_rows: usize,
    /// Models fitted separately for each profiled subsampling. `models` is
    /// used for any subsampling missing here.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_subsampling: BTreeMap<Subsampling, Models>,
    #[serde(default)]
    pub training_meta: TrainingMeta,
}

impl DeviceProfile {
    pub fn new(models: Models, chunk_rows: usize) -> Self {
        DeviceProfile {
            version: PROFILE_VERSION,
            device_description: String::new(),
            models,
            transfer: AffineCost::FREE,
            chunk_rows,
            by_subsampling: BTreeMap::new(),
            training_meta: TrainingMeta::default(),
        }
    }

    pub fn models_for(&self, subsampling: Subsampling) -> &Models {
        self.by_subsampling.get(&subsampling).unwrap_or(&self.models)
    }

    /// Copy whose `models` are the ones fitted for `subsampling`.
    pub fn for_subsampling(&self, subsampling: Subsampling) -> DeviceProfile {
        let mut p = self.clone();
        p.models = self.models_for(subsampling).clone();
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PROFILE_VERSION {
            return Err(Error::Profile(format!("unsupported profile version {}", self.version)));
        }
        for m in std::iter::once(&self.models).chain(self.by_subsampling.values()) {
            for (name, model, arity) in [
                ("p_cpu", &m.p_cpu, 2),
                ("p_gpu", &m.p_gpu, 2),
                ("t_disp", &m.t_disp, 2),
                ("t_huff_per_pixel", &m.t_huff_per_pixel, 1),
            ] {
                model.validate().map_err(|e| Error::Profile(format!("{name}: {e}")))?;
                if model.arity != arity {
                    return Err(Error::Profile(format!("{name} must have arity {arity}")));
                }
            }
        }
        if self.chunk_rows == 0 {
            return Err(Error::Profile("chunk_rows must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut p: DeviceProfile = serde_json::from_str(s).map_err(|e| Error::Profile(e.to_string()))?;
        for m in std::iter::once(&mut p.models).chain(p.by_subsampling.values_mut()) {
            for model in [&mut m.p_cpu, &mut m.p_gpu, &mut m.t_disp, &mut m.t_huff_per_pixel] {
                if model.offset.is_empty() && model.scale.is_empty() {
                    model.offset = vec![0.0; model.arity];
                    model.scale = vec![1.0; model.arity];
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::Profile(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::Profile(format!("{}: {e}", path.display())))
    }
}
