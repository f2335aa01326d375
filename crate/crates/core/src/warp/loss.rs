//! The geometric loss and its frozen-correspondence surrogate.
//!
//! With nearest-neighbor assignments held fixed every Chamfer-type term is a
//! weighted sum of L1 norms of point differences, so its gradient with
//! respect to the warped points is a weighted sum of sign vectors. Those
//! point gradients are pulled back to the affine parameters through the
//! linear blend.

use rayon::prelude::*;

use super::transforms::{warp_points, PartTransforms, PARAMS_PER_PART};
use crate::asset_io::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    nearest_all, part_distance_terms, symmetry_distance, LabeledPointSet, Metric, MissingPart, NnIndex,
    SymmetryPlane,
};
use crate::part_field::{blend_field, ellipsoid_point_set, BlendWeights, Ellipsoid};
use crate::Vec3;

/// Term breakdown of the geometric loss
/// `D_part(phi(P), Q) + D_part(xi(P), P) + alpha (D_sym(phi(P)) + D_sym(xi(P)))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometricLoss {
    pub total: f64,
    /// Part-aware distance from the warped source to the target.
    pub data: f64,
    /// Part-aware distance from the ellipsoid samples to the source.
    pub ellipsoid: f64,
    pub symmetry_warp: f64,
    pub symmetry_ellipsoid: f64,
}

impl GeometricLoss {
    pub(crate) fn assemble(data: f64, ellipsoid: f64, symmetry_warp: f64, symmetry_ellipsoid: f64, alpha: f64) -> Self {
        Self {
            total: data + ellipsoid + alpha * (symmetry_warp + symmetry_ellipsoid),
            data,
            ellipsoid,
            symmetry_warp,
            symmetry_ellipsoid,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.total, self.data, self.ellipsoid, self.symmetry_warp, self.symmetry_ellipsoid]
            .iter()
            .all(|x| x.is_finite())
    }
}

pub(crate) fn missing_policy(cfg: &RunConfig) -> MissingPart {
    if cfg.missing_part_penalty {
        MissingPart::Penalize
    } else {
        MissingPart::Ignore
    }
}

/// Evaluates the geometric loss directly from the metric functions.
pub fn geometric_loss(
    source: &LabeledPointSet,
    target: &LabeledPointSet,
    ells: &[Ellipsoid],
    transforms: &PartTransforms,
    cfg: &RunConfig,
) -> Result<GeometricLoss> {
    if source.part_names != target.part_names {
        return Err(Error::invalid("source and target part alphabets differ"));
    }
    if ells.len() != source.part_count() || transforms.len() != source.part_count() {
        return Err(Error::invalid("need one ellipsoid and one transform per part"));
    }
    let weights = blend_field(&source.points, ells, cfg.lambda);
    let warped = source.with_points(warp_points(&source.points, &weights, transforms));
    let xi = ellipsoid_point_set(ells, cfg.ellipsoid_surface_samples, &source.part_names);
    let policy = missing_policy(cfg);

    let data = part_distance_terms(&warped, target, policy)?.total;
    let ellipsoid = part_distance_terms(&xi, source, policy)?.total;
    let (sym_w, sym_e) = match cfg.symmetry()? {
        Some(plane) => (
            symmetry_distance(&warped.points, &plane)?,
            symmetry_distance(&xi.points, &plane)?,
        ),
        None => (0.0, 0.0),
    };
    Ok(GeometricLoss::assemble(data, ellipsoid, sym_w, sym_e, cfg.alpha))
}

/// `w * |x[a] - q[b]|_1`
#[derive(Debug, Clone, Copy)]
struct DataTerm {
    x: usize,
    q: usize,
    w: f64,
}

/// Symmetry terms, both over warped points only.
#[derive(Debug, Clone, Copy)]
enum SymTerm {
    /// `w * |x[a] - r(x[b])|_1`
    ToMirror { a: usize, b: usize, w: f64 },
    /// `w * |r(x[a]) - x[b]|_1`
    FromMirror { a: usize, b: usize, w: f64 },
}

/// Nearest-neighbor assignments for every Chamfer term that depends on the
/// warp, frozen at one warped configuration.
#[derive(Debug, Clone)]
pub struct Correspondences {
    data: Vec<DataTerm>,
    sym: Vec<SymTerm>,
}

/// Everything about a source/target pair that stays fixed while the affine
/// transforms change: blend weights, target indices and the ellipsoid terms.
#[derive(Debug, Clone)]
pub struct WarpProblem<'a> {
    pub source: &'a LabeledPointSet,
    pub target: &'a LabeledPointSet,
    pub weights: Vec<BlendWeights>,
    pub alpha: f64,
    pub plane: Option<SymmetryPlane>,
    policy: MissingPart,
    source_parts: Vec<Vec<usize>>,
    target_parts: Vec<Vec<usize>>,
    target_index: NnIndex,
    target_part_index: Vec<NnIndex>,
    /// `D_part(xi(P), P)`, constant in the transforms.
    pub ellipsoid_term: f64,
    /// `D_sym(xi(P))`, constant in the transforms.
    pub symmetry_ellipsoid_term: f64,
}

impl<'a> WarpProblem<'a> {
    pub fn new(
        source: &'a LabeledPointSet,
        target: &'a LabeledPointSet,
        ells: &[Ellipsoid],
        cfg: &RunConfig,
    ) -> Result<Self> {
        source.check()?;
        target.check()?;
        if source.part_names != target.part_names {
            return Err(Error::invalid(format!(
                "part alphabets differ: {:?} vs {:?}",
                source.part_names, target.part_names
            )));
        }
        if ells.len() != source.part_count() {
            return Err(Error::invalid(format!(
                "{} ellipsoids for {} parts",
                ells.len(),
                source.part_count()
            )));
        }
        if source.is_empty() || target.is_empty() {
            return Err(Error::invalid("empty point set"));
        }
        let plane = cfg.symmetry()?;
        let policy = missing_policy(cfg);
        let xi = ellipsoid_point_set(ells, cfg.ellipsoid_surface_samples, &source.part_names);
        let ellipsoid_term = part_distance_terms(&xi, source, policy)?.total;
        let symmetry_ellipsoid_term = match &plane {
            Some(p) => symmetry_distance(&xi.points, p)?,
            None => 0.0,
        };
        let target_parts = target.part_indices();
        Ok(Self {
            source,
            target,
            weights: blend_field(&source.points, ells, cfg.lambda),
            alpha: cfg.alpha,
            plane,
            policy,
            source_parts: source.part_indices(),
            target_index: NnIndex::build(&target.points),
            target_part_index: target_parts
                .iter()
                .map(|m| NnIndex::build_subset(&target.points, m))
                .collect(),
            target_parts,
            ellipsoid_term,
            symmetry_ellipsoid_term,
        })
    }

    pub fn part_count(&self) -> usize {
        self.source.part_count()
    }

    pub fn warp(&self, transforms: &PartTransforms) -> Vec<Vec3> {
        warp_points(&self.source.points, &self.weights, transforms)
    }

    /// Nearest-neighbor assignments at the given transforms.
    pub fn correspondences(&self, transforms: &PartTransforms) -> Correspondences {
        let x = self.warp(transforms);
        let q = &self.target.points;
        let (nx, nq) = (x.len() as f64, q.len() as f64);
        let x_index = NnIndex::build(&x);
        let mut data = Vec::new();

        for (k, (j, _)) in nearest_all(&x, &self.target_index, Metric::L1).into_iter().enumerate() {
            data.push(DataTerm { x: k, q: j, w: 0.5 / nx });
        }
        for (j, (k, _)) in nearest_all(q, &x_index, Metric::L1).into_iter().enumerate() {
            data.push(DataTerm { x: k, q: j, w: 0.5 / nq });
        }

        for i in 0..self.part_count() {
            let xs = &self.source_parts[i];
            let qs = &self.target_parts[i];
            let xs_pts: Vec<Vec3> = xs.iter().map(|&k| x[k]).collect();
            let qs_pts: Vec<Vec3> = qs.iter().map(|&j| q[j]).collect();
            match (xs.is_empty(), qs.is_empty()) {
                (true, true) => {}
                (false, false) => {
                    let w = 0.5 / xs.len() as f64;
                    for (&k, (j, _)) in xs.iter().zip(nearest_all(&xs_pts, &self.target_part_index[i], Metric::L1)) {
                        data.push(DataTerm { x: k, q: j, w });
                    }
                    let sub = NnIndex::build_subset(&x, xs);
                    let w = 0.5 / qs.len() as f64;
                    for (&j, (k, _)) in qs.iter().zip(nearest_all(&qs_pts, &sub, Metric::L1)) {
                        data.push(DataTerm { x: k, q: j, w });
                    }
                }
                (false, true) if self.policy == MissingPart::Penalize => {
                    let w = 1.0 / xs.len() as f64;
                    for (&k, (j, _)) in xs.iter().zip(nearest_all(&xs_pts, &self.target_index, Metric::L1)) {
                        data.push(DataTerm { x: k, q: j, w });
                    }
                }
                (true, false) if self.policy == MissingPart::Penalize => {
                    let w = 1.0 / qs.len() as f64;
                    for (&j, (k, _)) in qs.iter().zip(nearest_all(&qs_pts, &x_index, Metric::L1)) {
                        data.push(DataTerm { x: k, q: j, w });
                    }
                }
                _ => {}
            }
        }

        let mut sym = Vec::new();
        if let Some(plane) = &self.plane {
            let mirrored: Vec<Vec3> = x.iter().map(|p| plane.reflect(p)).collect();
            let m_index = NnIndex::build(&mirrored);
            let w = 0.5 / nx;
            for (a, (b, _)) in nearest_all(&x, &m_index, Metric::L1).into_iter().enumerate() {
                sym.push(SymTerm::ToMirror { a, b, w });
            }
            for (a, (b, _)) in nearest_all(&mirrored, &x_index, Metric::L1).into_iter().enumerate() {
                sym.push(SymTerm::FromMirror { a, b, w });
            }
        }
        Correspondences { data, sym }
    }

    /// Loss terms with the given assignments. With assignments computed at
    /// `transforms` this equals the exact geometric loss.
    pub fn frozen_loss(&self, transforms: &PartTransforms, corr: &Correspondences) -> GeometricLoss {
        let x = self.warp(transforms);
        self.frozen_loss_at(&x, corr)
    }

    fn frozen_loss_at(&self, x: &[Vec3], corr: &Correspondences) -> GeometricLoss {
        let q = &self.target.points;
        let data: f64 = corr
            .data
            .iter()
            .map(|t| t.w * Metric::L1.eval(&x[t.x], &q[t.q]))
            .sum();
        let sym: f64 = match &self.plane {
            Some(plane) => corr
                .sym
                .iter()
                .map(|t| match *t {
                    SymTerm::ToMirror { a, b, w } => w * Metric::L1.eval(&x[a], &plane.reflect(&x[b])),
                    SymTerm::FromMirror { a, b, w } => w * Metric::L1.eval(&plane.reflect(&x[a]), &x[b]),
                })
                .sum(),
            None => 0.0,
        };
        GeometricLoss::assemble(data, self.ellipsoid_term, sym, self.symmetry_ellipsoid_term, self.alpha)
    }

    /// Exact loss at `transforms` (fresh assignments).
    pub fn exact_loss(&self, transforms: &PartTransforms) -> GeometricLoss {
        let corr = self.correspondences(transforms);
        self.frozen_loss(transforms, &corr)
    }

    /// Gradient of the frozen-assignment loss with respect to the flat
    /// transform parameters (see [`PartTransforms::to_params`]).
    pub fn frozen_gradient(&self, transforms: &PartTransforms, corr: &Correspondences) -> Vec<f64> {
        let x = self.warp(transforms);
        let g = self.point_gradient(&x, corr);
        self.pull_back(&g)
    }

    /// Loss and parameter gradient in one pass.
    pub fn frozen_loss_and_gradient(
        &self,
        transforms: &PartTransforms,
        corr: &Correspondences,
    ) -> (GeometricLoss, Vec<f64>) {
        let x = self.warp(transforms);
        let loss = self.frozen_loss_at(&x, corr);
        let g = self.point_gradient(&x, corr);
        (loss, self.pull_back(&g))
    }

    fn point_gradient(&self, x: &[Vec3], corr: &Correspondences) -> Vec<Vec3> {
        let q = &self.target.points;
        let mut g = vec![Vec3::zeros(); x.len()];
        for t in &corr.data {
            g[t.x] += sign(&(x[t.x] - q[t.q])) * t.w;
        }
        if let Some(plane) = &self.plane {
            let n = plane.normal;
            // Householder part of the reflection, H = I - 2 n n^T (symmetric)
            let householder = |s: Vec3| s - n * (2.0 * n.dot(&s));
            for t in &corr.sym {
                match *t {
                    SymTerm::ToMirror { a, b, w } => {
                        let s = sign(&(x[a] - plane.reflect(&x[b]))) * (self.alpha * w);
                        g[a] += s;
                        g[b] -= householder(s);
                    }
                    SymTerm::FromMirror { a, b, w } => {
                        let s = sign(&(plane.reflect(&x[a]) - x[b])) * (self.alpha * w);
                        g[a] += householder(s);
                        g[b] -= s;
                    }
                }
            }
        }
        g
    }

    /// Chain rule through `phi(p) = p + sum_i w_i ((M_i - I) p + t_i)`.
    fn pull_back(&self, g: &[Vec3]) -> Vec<f64> {
        const CHUNK: usize = 512;
        let n_params = self.part_count() * PARAMS_PER_PART;
        let p = &self.source.points;
        let partials: Vec<Vec<f64>> = g
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = vec![0.0; n_params];
                for (off, gk) in chunk.iter().enumerate() {
                    let k = c * CHUNK + off;
                    if gk.x == 0.0 && gk.y == 0.0 && gk.z == 0.0 {
                        continue;
                    }
                    for (i, &w) in self.weights[k].0.iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let base = i * PARAMS_PER_PART;
                        for r in 0..3 {
                            let wg = w * gk[r];
                            for col in 0..3 {
                                acc[base + 3 * r + col] += wg * p[k][col];
                            }
                            acc[base + 9 + r] += wg;
                        }
                    }
                }
                acc
            })
            .collect();
        // fixed-order reduction keeps results independent of thread count
        let mut out = vec![0.0; n_params];
        for part in partials {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }
}

/// Per-coordinate sign with `sign(0) = 0`.
#[inline]
fn sign(v: &Vec3) -> Vec3 {
    v.map(|c| {
        if c > 0.0 {
            1.0
        } else if c < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}
