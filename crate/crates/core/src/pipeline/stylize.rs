use std::time::Instant;

use log::info;
use serde::Serialize;

use super::assets::{check_part_alphabets, Asset};
use crate::asset_io::{bounding_box, Mask, RunConfig, TextureImage, TexturedMesh};
use crate::error::{Error, Result};
use crate::metrics::{sample_surface, LabeledPointSet};
use crate::optim::Adam;
use crate::part_field::{blend_field, fit_mesh_part_ellipsoids, refine_ellipsoids, BlendWeights, Ellipsoid};
use crate::render::{camera_ring_around, rasterize, rasterize_traced, Camera};
use crate::texture_style::{
    apply_color_transform, image_stats, render_features, render_loss_gradient, solve_wct, style_loss,
    uv_coverage_mask, ColorTransform, RenderLossContext,
};
use crate::warp::{warp_points, OptimizerTrace, PartTransforms, TransformSolver};

/// Surface samples of source and target, drawn with seeds derived from
/// `cfg.random_seed`.
pub fn sample_pair(source: &Asset, target: &Asset, cfg: &RunConfig) -> Result<(LabeledPointSet, LabeledPointSet)> {
    let p = sample_surface(&source.mesh, &source.labels, cfg.sample_count, cfg.random_seed)?;
    let q = sample_surface(&target.mesh, &target.labels, cfg.sample_count, cfg.random_seed.wrapping_add(1))?;
    Ok((p, q))
}

/// One ellipsoid per part: fitted to per-part samples of the mesh, then
/// refined against `points`.
pub fn part_ellipsoids(asset: &Asset, points: &LabeledPointSet, cfg: &RunConfig) -> Result<Vec<Ellipsoid>> {
    let init = fit_mesh_part_ellipsoids(
        &asset.mesh,
        &asset.labels,
        cfg.ellipsoid_surface_samples,
        cfg.random_seed.wrapping_add(2),
    )?;
    refine_ellipsoids(&init, points, cfg.ellipsoid_refine_iters, cfg.ellipsoid_surface_samples)
}

/// Warps a mesh with precomputed per-vertex blend weights.
fn warp_with(mesh: &TexturedMesh, weights: &[BlendWeights], transforms: &PartTransforms) -> TexturedMesh {
    TexturedMesh {
        vertices: warp_points(&mesh.vertices, weights, transforms),
        ..mesh.clone()
    }
}

#[derive(Debug, Clone)]
pub struct GeometryTransfer {
    pub ellipsoids: Vec<Ellipsoid>,
    pub transforms: PartTransforms,
    pub trace: OptimizerTrace,
    /// The source mesh under the optimized warp.
    pub mesh: TexturedMesh,
    pub source_points: LabeledPointSet,
    pub target_points: LabeledPointSet,
}

/// Geometry-only transfer: ellipsoids for the source, then the part
/// transforms minimizing the geometric loss toward the target.
pub fn transfer_geometry(source: &Asset, target: &Asset, cfg: &RunConfig) -> Result<GeometryTransfer> {
    let setup = GeometrySetup::new(source, target, cfg)?;
    let mut solver = setup.solver(cfg)?;
    let trace = solver.run(cfg.geo_iters)?;
    Ok(setup.result(source, &solver, trace, cfg))
}

/// Samples and ellipsoids shared by geometry transfer and the joint loop.
struct GeometrySetup {
    p: LabeledPointSet,
    q: LabeledPointSet,
    ellipsoids: Vec<Ellipsoid>,
}

impl GeometrySetup {
    fn new(source: &Asset, target: &Asset, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        check_part_alphabets(source, target)?;
        let (p, q) = sample_pair(source, target, cfg)?;
        let ellipsoids = part_ellipsoids(source, &p, cfg)?;
        Ok(Self { p, q, ellipsoids })
    }

    fn solver(&self, cfg: &RunConfig) -> Result<TransformSolver<'_>> {
        TransformSolver::new(&self.p, &self.q, &self.ellipsoids, cfg)
    }

    fn result(&self, source: &Asset, solver: &TransformSolver, trace: OptimizerTrace, cfg: &RunConfig) -> GeometryTransfer {
        let transforms = solver.best_transforms();
        let weights = blend_field(&source.mesh.vertices, &self.ellipsoids, cfg.lambda);
        GeometryTransfer {
            mesh: warp_with(&source.mesh, &weights, &transforms),
            ellipsoids: self.ellipsoids.clone(),
            transforms,
            trace,
            source_points: self.p.clone(),
            target_points: self.q.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TextureTransfer {
    pub transform: ColorTransform,
    /// Source texture with the transform applied inside its UV coverage.
    pub texture: TextureImage,
    /// Source texels referenced by the source mesh.
    pub coverage: Mask,
}

/// Closed-form color transfer between the UV-covered texels of the two
/// textures.
pub fn transfer_texture(source: &Asset, target: &Asset) -> Result<TextureTransfer> {
    let (st, tt) = (source.texture()?, target.texture()?);
    let coverage = uv_coverage_mask(&source.mesh, st.width, st.height)?;
    let target_coverage = uv_coverage_mask(&target.mesh, tt.width, tt.height)?;
    let transform = solve_wct(&image_stats(st, &coverage)?, &image_stats(tt, &target_coverage)?);
    Ok(TextureTransfer {
        texture: apply_color_transform(st, &coverage, &transform)?,
        transform,
        coverage,
    })
}

/// Loss values evaluated at the start of one joint step, before its updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub step: usize,
    /// Geometric loss at the current transforms, exact assignments.
    pub geometric: f64,
    /// `β × content`.
    pub content: f64,
    /// `γ × style`.
    pub style: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StylizeResult {
    pub mesh: TexturedMesh,
    pub texture: TextureImage,
    pub transforms: PartTransforms,
    pub color_transform: ColorTransform,
    pub ellipsoids: Vec<Ellipsoid>,
    pub geometry_trace: OptimizerTrace,
    pub ledger: Vec<LedgerEntry>,
    /// Ledger step the result comes from; `None` when no joint step ran.
    pub best_step: Option<usize>,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
}

pub fn ledger_to_json(ledger: &[LedgerEntry], best_step: Option<usize>) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "steps": ledger,
        "best_step": best_step,
    }))
    .expect("ledger serializes")
}

/// Cameras shared by every render of a joint run: a ring around the union
/// of both meshes' bounding boxes.
pub fn shared_cameras(source: &TexturedMesh, target: &TexturedMesh, cfg: &RunConfig) -> Result<Vec<Camera>> {
    let pts: Vec<_> = source.vertices.iter().chain(&target.vertices).copied().collect();
    let (lo, hi) = bounding_box(&pts).ok_or_else(|| Error::invalid("no vertices to frame"))?;
    camera_ring_around(lo, hi, cfg.views, cfg.elevation_deg, cfg.image_resolution)
}

/// Style loss between renders of (`mesh`, `texture`) and of the target,
/// under the given cameras.
pub fn render_style_loss(
    mesh: &TexturedMesh,
    texture: &TextureImage,
    target: &Asset,
    cams: &[Camera],
    levels: usize,
) -> Result<f64> {
    let tt = target.texture()?;
    let ours: Vec<_> = cams.iter().map(|c| rasterize(mesh, Some(texture), c)).collect::<Result<_>>()?;
    let theirs: Vec<_> = cams.iter().map(|c| rasterize(&target.mesh, Some(tt), c)).collect::<Result<_>>()?;
    style_loss(&render_features(&ours, levels)?, &render_features(&theirs, levels)?)
}

/// Joint geometry and texture stylization.
///
/// 1. Geometry: [`transfer_geometry`]; its solver, with its optimizer
///    state, continues into step 3 from the best iterate.
/// 2. Texture initialization: [`transfer_texture`].
/// 3. `joint_steps` alternating steps. Each renders source, target and the
///    current result under shared cameras, records the loss, then takes one
///    Adam step on the color transform against `β·content + γ·style` and
///    one frozen-assignment step on the part transforms against the
///    geometric loss. The lowest-total step is returned.
///
/// With `β = γ = 0` the joint objective is the geometric loss already
/// minimized in phase 1, so phase 3 is skipped and the result is exactly the
/// phase 1 and 2 output.
pub fn stylize_joint(source: &Asset, target: &Asset, cfg: &RunConfig) -> Result<StylizeResult> {
    cfg.validate()?;
    check_part_alphabets(source, target)?;
    source.texture().map_err(|e| e.in_phase("texture"))?;
    target.texture().map_err(|e| e.in_phase("texture"))?;
    let mut timings = Vec::new();

    let clock = Instant::now();
    let setup = GeometrySetup::new(source, target, cfg).map_err(|e| e.in_phase("geometry"))?;
    let mut solver = setup.solver(cfg).map_err(|e| e.in_phase("geometry"))?;
    let trace = solver.run(cfg.geo_iters).map_err(|e| e.in_phase("geometry"))?;
    let geo = setup.result(source, &solver, trace, cfg);
    timings.push(("geometry".to_string(), clock.elapsed().as_secs_f64()));
    info!("geometry: best loss {:.6e} after {} iterations", geo.trace.best_total, geo.trace.iterations);

    let clock = Instant::now();
    let tex = transfer_texture(source, target).map_err(|e| e.in_phase("texture"))?;
    timings.push(("texture".to_string(), clock.elapsed().as_secs_f64()));

    let mut result = StylizeResult {
        mesh: geo.mesh.clone(),
        texture: tex.texture.clone(),
        transforms: geo.transforms.clone(),
        color_transform: tex.transform,
        ellipsoids: geo.ellipsoids.clone(),
        geometry_trace: geo.trace.clone(),
        ledger: Vec::new(),
        best_step: None,
        timings,
    };
    if cfg.joint_steps == 0 || (cfg.beta == 0.0 && cfg.gamma == 0.0) {
        return Ok(result);
    }

    let clock = Instant::now();
    solver.resume_from_best();
    joint_phase(source, target, cfg, &geo, &tex, &mut solver, &mut result).map_err(|e| match e {
        e @ Error::JointAbort { .. } => e,
        e => e.in_phase("joint"),
    })?;
    result.timings.push(("joint".to_string(), clock.elapsed().as_secs_f64()));
    Ok(result)
}

fn joint_phase(
    source: &Asset,
    target: &Asset,
    cfg: &RunConfig,
    geo: &GeometryTransfer,
    tex: &TextureTransfer,
    solver: &mut TransformSolver,
    result: &mut StylizeResult,
) -> Result<()> {
    let source_tex = source.texture()?;
    let cams = shared_cameras(&source.mesh, &target.mesh, cfg)?;
    let source_views: Vec<_> = cams
        .iter()
        .map(|c| rasterize(&source.mesh, Some(source_tex), c))
        .collect::<Result<_>>()?;
    let target_views: Vec<_> = cams
        .iter()
        .map(|c| rasterize(&target.mesh, Some(target.texture()?), c))
        .collect::<Result<_>>()?;
    let target_features = render_features(&target_views, cfg.pyramid_levels)?;
    let ctx = RenderLossContext {
        texture: source_tex,
        coverage: &tex.coverage,
        source_views: &source_views,
        target_features: &target_features,
        levels: cfg.pyramid_levels,
        beta: cfg.beta,
        gamma: cfg.gamma,
    };
    let weights = blend_field(&source.mesh.vertices, &geo.ellipsoids, cfg.lambda);
    let mut color = tex.transform.to_params();
    let mut color_adam = Adam::new(color.len(), cfg.color_learning_rate);

    let mut best: Option<(f64, usize, PartTransforms, ColorTransform)> = None;
    for step in 0..cfg.joint_steps {
        let transforms = solver.transforms();
        let ct = ColorTransform::from_params(&color);
        let mesh = warp_with(&source.mesh, &weights, &transforms);
        let texture = apply_color_transform(source_tex, &tex.coverage, &ct)?;
        let views: Vec<_> = cams
            .iter()
            .map(|c| rasterize_traced(&mesh, &texture, c))
            .collect::<Result<_>>()?;
        let (terms, grad) = render_loss_gradient(&ctx, &views, &ct)?;
        let geometric = solver.problem().exact_loss(&transforms).total;
        let entry = LedgerEntry {
            step,
            geometric,
            content: cfg.beta * terms.content,
            style: cfg.gamma * terms.style,
            total: geometric + cfg.beta * terms.content + cfg.gamma * terms.style,
        };
        result.ledger.push(entry);
        if !entry.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::JointAbort {
                step,
                message: format!(
                    "non-finite joint loss (geometric {}, content {}, style {})",
                    entry.geometric, entry.content, entry.style
                ),
                ledger_json: ledger_to_json(&result.ledger, best.as_ref().map(|b| b.1)),
            });
        }
        if best.as_ref().is_none_or(|b| entry.total < b.0) {
            best = Some((entry.total, step, transforms, ct));
        }
        info!(
            "joint step {step}: total {:.6e} (geometric {:.6e}, content {:.3e}, style {:.3e})",
            entry.total, entry.geometric, entry.content, entry.style
        );
        color_adam.step(&mut color, &grad);
        solver.step().map_err(|e| Error::JointAbort {
            step,
            message: e.to_string(),
            ledger_json: ledger_to_json(&result.ledger, best.as_ref().map(|b| b.1)),
        })?;
    }

    let (_, step, transforms, ct) = best.expect("at least one joint step ran");
    result.mesh = warp_with(&source.mesh, &weights, &transforms);
    result.texture = apply_color_transform(source_tex, &tex.coverage, &ct)?;
    result.transforms = transforms;
    result.color_transform = ct;
    result.best_step = Some(step);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{quadruped, QuadrupedParams};

    fn small_cfg() -> RunConfig {
        RunConfig {
            sample_count: 800,
            ellipsoid_surface_samples: 128,
            views: 3,
            image_resolution: 48,
            geo_iters: 40,
            joint_steps: 4,
            ellipsoid_refine_iters: 3,
            pyramid_levels: 3,
            ..RunConfig::default()
        }
    }

    fn pair(parts: usize) -> (Asset, Asset) {
        let a = quadruped(&QuadrupedParams::random(11).with_parts(parts));
        let b = quadruped(&QuadrupedParams::random(12).with_parts(parts));
        (a.into(), b.into())
    }

    fn same_mesh(a: &TexturedMesh, b: &TexturedMesh) -> bool {
        a.vertices.len() == b.vertices.len()
            && a.vertices.iter().zip(&b.vertices).all(|(u, v)| u.iter().zip(v.iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }

    #[test]
    fn zero_render_weights_reduce_to_separate_transfers() {
        let (s, t) = pair(4);
        let cfg = RunConfig {
            beta: 0.0,
            gamma: 0.0,
            ..small_cfg()
        };
        let joint = stylize_joint(&s, &t, &cfg).unwrap();
        let geo = transfer_geometry(&s, &t, &cfg).unwrap();
        let tex = transfer_texture(&s, &t).unwrap();
        assert!(same_mesh(&joint.mesh, &geo.mesh));
        assert_eq!(joint.texture.pixels, tex.texture.pixels);
        assert_eq!(joint.color_transform, tex.transform);
        assert!(joint.ledger.is_empty());
        assert_eq!(joint.best_step, None);
    }

    #[test]
    fn zero_joint_steps_skips_the_joint_phase() {
        let (s, t) = pair(3);
        let cfg = RunConfig {
            joint_steps: 0,
            ..small_cfg()
        };
        let joint = stylize_joint(&s, &t, &cfg).unwrap();
        let geo = transfer_geometry(&s, &t, &cfg).unwrap();
        assert!(same_mesh(&joint.mesh, &geo.mesh));
        assert!(joint.ledger.is_empty());
        assert!(!joint.timings.iter().any(|(p, _)| p == "joint"));
    }

    #[test]
    fn ledger_is_consistent_and_best_is_minimal() {
        let (s, t) = pair(5);
        let r = stylize_joint(&s, &t, &small_cfg()).unwrap();
        assert_eq!(r.ledger.len(), 4);
        for (i, e) in r.ledger.iter().enumerate() {
            assert_eq!(e.step, i);
            assert!((e.total - (e.geometric + e.content + e.style)).abs() <= 1e-12 * e.total.abs());
        }
        let best = r.best_step.unwrap();
        let min = r.ledger.iter().map(|e| e.total).fold(f64::INFINITY, f64::min);
        assert_eq!(r.ledger[best].total, min);
        assert!(r.ledger[best].total <= r.ledger[0].total);
        let doc: serde_json::Value = serde_json::from_str(&ledger_to_json(&r.ledger, r.best_step)).unwrap();
        assert_eq!(doc["best_step"], best);
        assert_eq!(doc["steps"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn self_transfer_keeps_colors() {
        let (s, _) = pair(4);
        let r = stylize_joint(&s, &s, &small_cfg()).unwrap();
        let id = ColorTransform::identity();
        for (a, b) in r.color_transform.to_params().iter().zip(id.to_params()) {
            assert!((a - b).abs() <= 0.05, "{:?}", r.color_transform);
        }
        assert!(r.ledger[r.best_step.unwrap()].total <= r.ledger[0].total);
    }

    #[test]
    fn runs_are_deterministic() {
        let (s, t) = pair(3);
        let a = stylize_joint(&s, &t, &small_cfg()).unwrap();
        let b = stylize_joint(&s, &t, &small_cfg()).unwrap();
        assert!(same_mesh(&a.mesh, &b.mesh));
        assert_eq!(a.texture.pixels, b.texture.pixels);
        assert_eq!(a.ledger, b.ledger);
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        let (s, _) = pair(3);
        let (_, t) = pair(4);
        assert!(matches!(stylize_joint(&s, &t, &small_cfg()), Err(Error::Labels(_))));
    }

    #[test]
    fn missing_texture_is_reported() {
        let (mut s, t) = pair(3);
        s.texture = None;
        let err = stylize_joint(&s, &t, &small_cfg()).unwrap_err();
        assert!(err.to_string().contains("texture"), "{err}");
    }
}
