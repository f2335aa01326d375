//! Per-part ellipsoids and the Gaussian blend (skinning) field built on them.

mod blend;
mod ellipsoid;
mod refine;

pub use blend::{blend_field, blend_weights, gaussian_exponent, gaussian_weight, BlendWeights, UNDERFLOW_MASS};
pub use ellipsoid::{
    ellipsoid_point_set, ellipsoids_from_json, ellipsoids_to_json, fibonacci_sphere, fit_ellipsoid,
    fit_mesh_part_ellipsoids, fit_part_ellipsoids, orthonormalize, sample_ellipsoid_surface, Ellipsoid, SEMI_AXIS_FLOOR_ABS,
    SEMI_AXIS_FLOOR_FRACTION,
};
pub use refine::{refine_ellipsoids, refine_ellipsoids_report, Refinement};
