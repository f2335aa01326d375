use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SymmetryPlane;

/// Every tunable of a run. On disk this is a `key = value` document whose
/// keys are exactly the field names below; missing keys take their defaults
/// and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Spread of the ellipsoid-aligned Gaussians in the blend field.
    pub lambda: f64,
    /// Weight of the two symmetry terms in the geometric loss.
    pub alpha: f64,
    /// Weight of the render-space content term in the joint objective.
    pub beta: f64,
    /// Weight of the render-space style term in the joint objective.
    pub gamma: f64,
    pub sample_count: usize,
    pub ellipsoid_surface_samples: usize,
    pub views: usize,
    pub elevation_deg: f64,
    pub image_resolution: usize,
    pub geo_iters: usize,
    pub joint_steps: usize,
    pub correspondence_refresh: usize,
    pub fscore_tau_fraction: f64,
    /// `"x=0"`-style axis plane, `"nx,ny,nz,d"` for a general plane, or `"none"`.
    pub symmetry_plane: String,
    pub random_seed: u64,
    /// Coordinate-descent sweeps used to refine the fitted ellipsoids.
    pub ellipsoid_refine_iters: usize,
    pub geo_learning_rate: f64,
    pub color_learning_rate: f64,
    pub pyramid_levels: usize,
    /// Penalize parts present on only one side of a part-aware distance.
    pub missing_part_penalty: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 4.0,
            alpha: 0.1,
            beta: 0.01,
            gamma: 0.001,
            sample_count: 4096,
            ellipsoid_surface_samples: 512,
            views: 8,
            elevation_deg: 20.0,
            image_resolution: 256,
            geo_iters: 400,
            joint_steps: 20,
            correspondence_refresh: 5,
            fscore_tau_fraction: 0.01,
            symmetry_plane: "x=0".to_string(),
            random_seed: 0,
            ellipsoid_refine_iters: 10,
            geo_learning_rate: 0.01,
            color_learning_rate: 0.002,
            pyramid_levels: 4,
            missing_part_penalty: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("fscore_tau_fraction", self.fscore_tau_fraction),
            ("geo_learning_rate", self.geo_learning_rate),
            ("color_learning_rate", self.color_learning_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        let counts = [
            ("sample_count", self.sample_count),
            ("ellipsoid_surface_samples", self.ellipsoid_surface_samples),
            ("views", self.views),
            ("image_resolution", self.image_resolution),
            ("correspondence_refresh", self.correspondence_refresh),
            ("pyramid_levels", self.pyramid_levels),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !self.elevation_deg.is_finite() || self.elevation_deg.abs() >= 90.0 {
            return Err(Error::Config(format!(
                "elevation_deg must be in (-90, 90), got {}",
                self.elevation_deg
            )));
        }
        self.symmetry()?;
        Ok(())
    }

    /// The parsed symmetry plane; `None` disables the symmetry terms.
    pub fn symmetry(&self) -> Result<Option<SymmetryPlane>> {
        SymmetryPlane::parse(&self.symmetry_plane).map_err(Error::Config)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
