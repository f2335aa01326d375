use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asset_io::TexturedMesh;
use crate::error::{Error, Result};
use crate::part_field::{blend_field, BlendWeights, Ellipsoid};
use crate::{Mat3, Vec3};

/// Number of scalar parameters per part: 3x3 linear map plus translation.
pub const PARAMS_PER_PART: usize = 12;

/// 3D affine map `p -> linear * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: Mat3,
    pub translation: Vec3,
}

impl Affine {
    pub fn identity() -> Self {
        Self {
            linear: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.linear * p + self.translation
    }

    /// `apply(p) - p`, computed without forming `linear * p` so that the
    /// identity map yields exactly zero.
    #[inline]
    pub fn displacement(&self, p: &Vec3) -> Vec3 {
        (self.linear - Mat3::identity()) * p + self.translation
    }
}

/// One affine transform per part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartTransforms {
    pub parts: Vec<Affine>,
}

impl PartTransforms {
    pub fn identity(parts: usize) -> Self {
        Self {
            parts: vec![Affine::identity(); parts],
        }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Flat parameters: per part, the linear map row-major then the translation.
    pub fn to_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parts.len() * PARAMS_PER_PART);
        for a in &self.parts {
            for r in 0..3 {
                for c in 0..3 {
                    out.push(a.linear[(r, c)]);
                }
            }
            out.extend(a.translation.iter());
        }
        out
    }

    pub fn from_params(params: &[f64]) -> Self {
        assert_eq!(params.len() % PARAMS_PER_PART, 0);
        let parts = params
            .chunks_exact(PARAMS_PER_PART)
            .map(|c| Affine {
                linear: Mat3::from_fn(|r, k| c[3 * r + k]),
                translation: Vec3::new(c[9], c[10], c[11]),
            })
            .collect();
        Self { parts }
    }

    pub fn is_finite(&self) -> bool {
        self.to_params().iter().all(|x| x.is_finite())
    }

    pub fn to_json(&self, part_names: &[String]) -> String {
        let doc = TransformDoc {
            transforms: self
                .parts
                .iter()
                .zip(part_names)
                .map(|(a, name)| TransformRecord {
                    part: name.clone(),
                    linear: [0, 1, 2].map(|r| [0, 1, 2].map(|c| a.linear[(r, c)])),
                    translation: a.translation.into(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("transforms serialize")
    }

    pub fn from_json(text: &str) -> Result<(Self, Vec<String>)> {
        let doc: TransformDoc =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("transforms: {e}")))?;
        let mut names = Vec::new();
        let mut parts = Vec::new();
        for r in doc.transforms {
            names.push(r.part);
            parts.push(Affine {
                linear: Mat3::from_fn(|i, j| r.linear[i][j]),
                translation: r.translation.into(),
            });
        }
        let t = Self { parts };
        if !t.is_finite() {
            return Err(Error::invalid("transforms contain non-finite entries"));
        }
        Ok((t, names))
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRecord {
    part: String,
    linear: [[f64; 3]; 3],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct TransformDoc {
    transforms: Vec<TransformRecord>,
}

/// Blended affine warp `phi(p) = sum_i w_i(p) (M_i p + t_i)`, evaluated as
/// `p + sum_i w_i(p) ((M_i - I) p + t_i)` (equal because the weights sum to
/// one) so identity transforms reproduce the input bit for bit.
#[inline]
pub fn warp_point(p: &Vec3, w: &BlendWeights, transforms: &PartTransforms) -> Vec3 {
    let mut d = Vec3::zeros();
    for (wi, a) in w.0.iter().zip(&transforms.parts) {
        if *wi != 0.0 {
            d += a.displacement(p) * *wi;
        }
    }
    p + d
}

pub fn warp_points(points: &[Vec3], weights: &[BlendWeights], transforms: &PartTransforms) -> Vec<Vec3> {
    assert_eq!(points.len(), weights.len(), "one weight vector per point");
    points
        .par_iter()
        .zip(weights.par_iter())
        .map(|(p, w)| warp_point(p, w, transforms))
        .collect()
}

/// Warps the mesh vertices; connectivity, UVs and texture are kept. Blend
/// weights are evaluated at the rest-pose vertices.
pub fn warp_mesh(mesh: &TexturedMesh, ells: &[Ellipsoid], transforms: &PartTransforms, lambda: f64) -> TexturedMesh {
    assert_eq!(ells.len(), transforms.len(), "one transform per ellipsoid");
    let weights = blend_field(&mesh.vertices, ells, lambda);
    TexturedMesh {
        vertices: warp_points(&mesh.vertices, &weights, transforms),
        ..mesh.clone()
    }
}
