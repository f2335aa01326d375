//! Part-aware geometric and texture style transfer between textured meshes.
//!
//! A source mesh is warped toward the shape of a target mesh by a smooth
//! field of per-part affine transforms, blended through Gaussians aligned
//! with ellipsoids fitted to each semantic part. Its texture is recolored
//! toward the target's color statistics and refined on multi-view renders.
//!
//! Modules, bottom up:
//!
//! - [`asset_io`]: meshes, textures, part labels, run configuration
//! - [`metrics`]: surface sampling, exact nearest neighbors, Chamfer-type
//!   distances, symmetry distance, F-score
//! - [`part_field`]: ellipsoid fitting/refinement and the blend field
//! - [`warp`]: the blended affine warp, geometric loss and its optimizer
//! - [`render`]: software rasterizer producing color, mask and depth
//! - [`texture_style`]: color-statistics transfer and render-space losses
//! - [`pipeline`]: the joint geometry + texture loop and run manifests
//! - [`cli`]: command-line front end
//! - [`synth`]: procedural part-labeled textured meshes for tests and demos

pub mod asset_io;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod part_field;
pub mod pipeline;
pub mod render;
pub mod synth;
pub mod texture_style;
pub mod warp;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
