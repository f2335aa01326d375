use log::warn;
use rayon::prelude::*;

use super::color::{color_stats, ColorStats, ColorTransform};
use super::pyramid::{build_levels, masked_blur, masked_blur_adjoint, PyramidFeatures};
use crate::asset_io::{Mask, TextureImage};
use crate::error::{Error, Result};
use crate::render::{RenderOutput, TexelTrace};
use crate::{Mat3, Vec3};

/// Luminance weights of R, G, B.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// `‖μ_a − μ_b‖² + ‖Σ_a − Σ_b‖_F²`.
pub fn stats_distance(a: &ColorStats, b: &ColorStats) -> f64 {
    (a.mean - b.mean).norm_squared() + (a.covariance - b.covariance).norm_squared()
}

/// Sum over views and over the levels both sides have of [`stats_distance`].
pub fn style_loss(a: &[PyramidFeatures], b: &[PyramidFeatures]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("style loss needs at least one view"));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{} views against {}", a.len(), b.len())));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(fa, fb)| {
            fa.levels
                .iter()
                .zip(&fb.levels)
                .map(|(sa, sb)| stats_distance(sa, sb))
                .sum::<f64>()
        })
        .sum())
}

/// Luminance of the masked-blurred render, with the blur normalizer.
fn blurred_luminance(r: &RenderOutput) -> (Vec<f64>, Vec<f64>) {
    let (blurred, norm) = masked_blur(&r.rgb.pixels, &r.mask.bits, r.rgb.width, r.rgb.height);
    (blurred.iter().map(luma).collect(), norm)
}

fn luma(c: &[f64; 3]) -> f64 {
    LUMA[0] * c[0] + LUMA[1] * c[1] + LUMA[2] * c[2]
}

fn check_pair(a: &RenderOutput, b: &RenderOutput) -> Result<()> {
    if (a.rgb.width, a.rgb.height) != (b.rgb.width, b.rgb.height) {
        return Err(Error::invalid("content loss views differ in size"));
    }
    Ok(())
}

/// Mean over views of the mean squared difference of blurred luminance over
/// the pixels both masks cover. A view without overlap contributes 0.
pub fn content_loss(a: &[RenderOutput], b: &[RenderOutput]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{} views against {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        check_pair(ra, rb)?;
        let (la, _) = blurred_luminance(ra);
        let (lb, _) = blurred_luminance(rb);
        let both = ra.mask.and(&rb.mask);
        let n = both.count();
        if n == 0 {
            warn!("view {i}: masks do not overlap; content term is 0");
            continue;
        }
        let sum: f64 = (0..la.len())
            .filter(|&k| both.bits[k])
            .map(|k| (la[k] - lb[k]).powi(2))
            .sum();
        total += sum / n as f64;
    }
    Ok(total / a.len() as f64)
}

/// Pyramid features of every render under its own mask.
pub fn render_features(renders: &[RenderOutput], levels: usize) -> Result<Vec<PyramidFeatures>> {
    renders
        .par_iter()
        .map(|r| super::pyramid::pyramid_features(&r.rgb, &r.mask, levels))
        .collect()
}

/// Unweighted render-space terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderTerms {
    pub content: f64,
    pub style: f64,
}

/// Inputs of [`render_loss_gradient`] that stay fixed while the color
/// transform changes.
pub struct RenderLossContext<'a> {
    /// Untransformed source texture.
    pub texture: &'a TextureImage,
    /// Texels the transform applies to.
    pub coverage: &'a Mask,
    /// Renders of the unmodified source, the content reference.
    pub source_views: &'a [RenderOutput],
    /// Features of the target renders, the style reference.
    pub target_features: &'a [PyramidFeatures],
    pub levels: usize,
    pub beta: f64,
    pub gamma: f64,
}

/// Content and style terms of the stylized renders and the gradient of
/// `β·content + γ·style` with respect to [`ColorTransform::to_params`].
///
/// `views` are renders of the current shape with the texture produced by
/// `t`, traced so each foreground pixel is a known bilinear combination of
/// transformed texels. The resampling is held fixed; the derivative flows
/// through the clamp (zero outside `[0, 1]`), the pyramid blurs and
/// subsampling, and the masked moments.
pub fn render_loss_gradient(
    ctx: &RenderLossContext,
    views: &[(RenderOutput, TexelTrace)],
    t: &ColorTransform,
) -> Result<(RenderTerms, [f64; 12])> {
    if views.is_empty() || views.len() != ctx.source_views.len() || views.len() != ctx.target_features.len() {
        return Err(Error::invalid("render loss needs matching, non-empty view lists"));
    }
    let n_views = views.len() as f64;
    let per_view: Vec<(f64, f64, [f64; 12])> = views
        .par_iter()
        .zip(ctx.source_views.par_iter())
        .zip(ctx.target_features.par_iter())
        .map(|(((render, trace), source), target)| view_gradient(ctx, render, trace, source, target, t, n_views))
        .collect::<Result<_>>()?;
    let mut content = 0.0;
    let mut style = 0.0;
    let mut grad = [0.0; 12];
    for (c, s, g) in per_view {
        content += c;
        style += s;
        for k in 0..12 {
            grad[k] += g[k];
        }
    }
    Ok((
        RenderTerms {
            content: content / n_views,
            style,
        },
        grad,
    ))
}

/// Returns (content sum for this view, style for this view, gradient).
fn view_gradient(
    ctx: &RenderLossContext,
    render: &RenderOutput,
    trace: &TexelTrace,
    source: &RenderOutput,
    target: &PyramidFeatures,
    t: &ColorTransform,
    n_views: f64,
) -> Result<(f64, f64, [f64; 12])> {
    check_pair(render, source)?;
    let (w, h) = (render.rgb.width, render.rgb.height);
    let (levels, norms) = build_levels(&render.rgb, &render.mask, ctx.levels)?;
    let used = levels.len().min(target.levels.len());

    // style: value and gradient on each level's pixels
    let mut style = 0.0;
    let mut level_grads: Vec<Vec<[f64; 3]>> = Vec::with_capacity(used);
    for (lv, tgt) in levels.iter().zip(&target.levels).take(used) {
        let s = color_stats(&lv.pixels, &lv.mask)?;
        style += stats_distance(&s, tgt);
        let n = s.pixel_count as f64;
        let dmean: Vec3 = (2.0 / n) * (s.mean - tgt.mean);
        let dcov: Mat3 = (4.0 / n) * (s.covariance - tgt.covariance);
        let g = lv
            .pixels
            .iter()
            .zip(&lv.mask)
            .map(|(p, &m)| {
                if !m {
                    return [0.0; 3];
                }
                let v = ctx.gamma * (dmean + dcov * (Vec3::from(*p) - s.mean));
                [v.x, v.y, v.z]
            })
            .collect();
        level_grads.push(g);
    }

    // content: level-0 blur of both renders, compared on the mask overlap
    let (blurred, norm0) = masked_blur(&render.rgb.pixels, &render.mask.bits, w, h);
    let (source_luma, _) = blurred_luminance(source);
    let both = render.mask.and(&source.mask);
    let overlap = both.count();
    let mut content = 0.0;
    let mut blur_grad = vec![[0.0; 3]; w * h];
    if overlap > 0 {
        let scale = ctx.beta * 2.0 / (overlap as f64 * n_views);
        let mut sum = 0.0;
        for k in (0..w * h).filter(|&k| both.bits[k]) {
            let d = luma(&blurred[k]) - source_luma[k];
            sum += d * d;
            for c in 0..3 {
                blur_grad[k][c] = scale * d * LUMA[c];
            }
        }
        content = sum / overlap as f64;
    }

    // backward through the pyramid, coarsest level first
    for l in (1..used).rev() {
        let prev = &levels[l - 1];
        let mut up = vec![[0.0; 3]; prev.width * prev.height];
        let cur = &levels[l];
        for y in 0..cur.height {
            for x in 0..cur.width {
                up[2 * y * prev.width + 2 * x] = level_grads[l][y * cur.width + x];
            }
        }
        let back = masked_blur_adjoint(&up, &norms[l - 1], &prev.mask, prev.width, prev.height);
        for (g, b) in level_grads[l - 1].iter_mut().zip(back) {
            for c in 0..3 {
                g[c] += b[c];
            }
        }
    }
    let mut pixel_grad = level_grads.swap_remove(0);
    let back = masked_blur_adjoint(&blur_grad, &norm0, &render.mask.bits, w, h);
    for (g, b) in pixel_grad.iter_mut().zip(back) {
        for c in 0..3 {
            g[c] += b[c];
        }
    }

    // through the texture resampling and the clamped color transform
    let mut grad = [0.0; 12];
    for (k, taps) in trace.taps.iter().enumerate() {
        let Some(taps) = taps else { continue };
        let g = pixel_grad[k];
        if g == [0.0; 3] {
            continue;
        }
        for &(i, wt) in taps {
            if wt == 0.0 || !ctx.coverage.bits[i] {
                continue;
            }
            let texel = Vec3::from(ctx.texture.pixels[i]);
            let pre = t.apply_unclamped(&texel);
            for c in 0..3 {
                if !(0.0..=1.0).contains(&pre[c]) {
                    continue;
                }
                let gc = g[c] * wt;
                for j in 0..3 {
                    grad[3 * c + j] += gc * texel[j];
                }
                grad[9 + c] += gc;
            }
        }
    }
    Ok((content, style, grad))
}
