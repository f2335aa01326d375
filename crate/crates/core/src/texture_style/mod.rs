//! Color-statistics texture transfer and the masked multi-view content and
//! style losses computed on image-pyramid statistics.

mod color;
mod loss;
mod pyramid;

pub use color::{
    apply_color_transform, color_stats, image_stats, solve_wct, uv_coverage_mask, ColorStats, ColorTransform,
    MIN_STATS_PIXELS, WCT_EIGEN_FLOOR,
};
pub use loss::{
    content_loss, render_features, render_loss_gradient, stats_distance, style_loss, RenderLossContext, RenderTerms,
    LUMA,
};
pub use pyramid::{pyramid_features, PyramidFeatures, BLUR_TAPS};
