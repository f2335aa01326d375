//! The blended affine warp, the geometric loss, and the per-pair solver for
//! the part transforms.

mod loss;
mod solver;
mod transforms;

pub use loss::{geometric_loss, Correspondences, GeometricLoss, WarpProblem};
pub use solver::{
    optimize_transforms, OptimizerTrace, StopReason, TraceEntry, TransformSolver, CONVERGENCE_TOLERANCE,
};
pub use transforms::{warp_mesh, warp_point, warp_points, Affine, PartTransforms, PARAMS_PER_PART};
