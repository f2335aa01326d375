//! Surface sampling, nearest-neighbor indexing, and point-set metrics.

mod distance;
mod index;
mod sampling;

pub use distance::{
    bbox_diagonal, chamfer_l1, chamfer_l2, f_score, mean_nearest, nearest_all, part_distance,
    part_distance_terms, symmetry_distance, FScore, MissingPart, PartDistance, SymmetryPlane,
};
pub use index::{Metric, NnIndex};
pub use sampling::{sample_surface, LabeledPointSet};
