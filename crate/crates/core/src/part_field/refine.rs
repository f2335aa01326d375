//! Coordinate-descent refinement of part ellipsoids against the part-aware
//! distance between their surface samples and the part points.

use rayon::prelude::*;

use super::ellipsoid::{fibonacci_sphere, orthonormalize, Ellipsoid};
use crate::error::{Error, Result};
use crate::metrics::{LabeledPointSet, Metric, NnIndex};
use crate::{Mat3, Vec3};

/// Outcome of [`refine_ellipsoids_report`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub ellipsoids: Vec<Ellipsoid>,
    /// Loss before the first sweep followed by the loss after each sweep.
    pub losses: Vec<f64>,
    pub accepted_steps: usize,
}

pub fn refine_ellipsoids(
    ells: &[Ellipsoid],
    parts: &LabeledPointSet,
    iters: usize,
    samples_per_ellipsoid: usize,
) -> Result<Vec<Ellipsoid>> {
    Ok(refine_ellipsoids_report(ells, parts, iters, samples_per_ellipsoid)?.ellipsoids)
}

/// Minimizes `D_part(xi, P)`, where `xi` are lattice samples on the
/// ellipsoids, over each ellipsoid's center, orientation (small rotations
/// composed on the left) and log semi-axes. Only strictly improving steps
/// are kept, so the loss never increases.
pub fn refine_ellipsoids_report(
    ells: &[Ellipsoid],
    parts: &LabeledPointSet,
    iters: usize,
    samples_per_ellipsoid: usize,
) -> Result<Refinement> {
    if ells.len() != parts.part_count() {
        return Err(Error::invalid(format!(
            "{} ellipsoids for {} parts",
            ells.len(),
            parts.part_count()
        )));
    }
    let mut ells = ells.to_vec();
    if iters == 0 {
        return Ok(Refinement {
            ellipsoids: ells,
            losses: Vec::new(),
            accepted_steps: 0,
        });
    }
    let mut state = SampleCache::new(&ells, parts, samples_per_ellipsoid.max(1))?;
    let mut loss = state.loss(None);
    let mut losses = vec![loss];

    let mut steps: Vec<[f64; 9]> = ells
        .iter()
        .map(|e| {
            let scale = e.semi_axes.mean();
            let mut s = [0.1; 9];
            s[..3].iter_mut().for_each(|x| *x = 0.1 * scale);
            s
        })
        .collect();

    let mut accepted = 0;
    for _ in 0..iters {
        for i in 0..ells.len() {
            for k in 0..9 {
                if steps[i][k] < 1e-7 {
                    continue;
                }
                let mut improved = false;
                for sign in [1.0, -1.0] {
                    let cand = perturb(&ells[i], k, sign * steps[i][k]);
                    let eval = state.evaluate(i, &cand);
                    let cand_loss = state.loss(Some((i, &eval)));
                    if cand_loss < loss - 1e-12 * loss.abs() {
                        ells[i] = cand;
                        state.commit(i, eval);
                        loss = cand_loss;
                        improved = true;
                        accepted += 1;
                        break;
                    }
                }
                if !improved {
                    steps[i][k] *= 0.5;
                }
            }
        }
        losses.push(loss);
    }
    Ok(Refinement {
        ellipsoids: ells,
        losses,
        accepted_steps: accepted,
    })
}

fn perturb(e: &Ellipsoid, coord: usize, delta: f64) -> Ellipsoid {
    let mut out = *e;
    match coord {
        0..=2 => out.center[coord] += delta,
        3..=5 => {
            let mut w = Vec3::zeros();
            w[coord - 3] = delta;
            let r: Mat3 = *nalgebra::Rotation3::new(w).matrix();
            out.rotation = orthonormalize(&(r * e.rotation));
        }
        _ => out.semi_axes[coord - 6] *= delta.exp(),
    }
    out
}

/// Per-ellipsoid nearest-neighbor sums, so a change to one ellipsoid costs
/// one small index build instead of a full re-evaluation.
struct SampleCache<'a> {
    target: &'a LabeledPointSet,
    part_members: Vec<Vec<usize>>,
    full_index: NnIndex,
    part_index: Vec<NnIndex>,
    lattice: Vec<Vec3>,
    evals: Vec<EllipsoidEval>,
}

struct EllipsoidEval {
    /// Sum over this ellipsoid's samples of the L1 distance to the nearest target point.
    to_all: f64,
    /// Same, restricted to target points of the ellipsoid's own part.
    to_part: f64,
    /// For every target point, the L1 distance to the nearest sample of this ellipsoid.
    from_target: Vec<f64>,
}

impl<'a> SampleCache<'a> {
    fn new(ells: &[Ellipsoid], target: &'a LabeledPointSet, m: usize) -> Result<Self> {
        let part_members = target.part_indices();
        let full_index = NnIndex::build(&target.points);
        let part_index = part_members
            .iter()
            .map(|m| NnIndex::build_subset(&target.points, m))
            .collect();
        let mut cache = Self {
            target,
            part_members,
            full_index,
            part_index,
            lattice: fibonacci_sphere(m),
            evals: Vec::new(),
        };
        cache.evals = ells.iter().enumerate().map(|(i, e)| cache.evaluate(i, e)).collect();
        Ok(cache)
    }

    fn evaluate(&self, part: usize, e: &Ellipsoid) -> EllipsoidEval {
        let samples: Vec<Vec3> = self.lattice.iter().map(|u| e.map_unit(u)).collect();
        let mut to_all = 0.0;
        let mut to_part = 0.0;
        for s in &samples {
            to_all += self.full_index.nearest(s, Metric::L1).unwrap().1;
            if let Some((_, d)) = self.part_index[part].nearest(s, Metric::L1) {
                to_part += d;
            }
        }
        let idx = NnIndex::build(&samples);
        let from_target = self
            .target
            .points
            .par_iter()
            .map(|p| idx.nearest(p, Metric::L1).unwrap().1)
            .collect();
        EllipsoidEval {
            to_all,
            to_part,
            from_target,
        }
    }

    fn commit(&mut self, part: usize, eval: EllipsoidEval) {
        self.evals[part] = eval;
    }

    /// Loss with the cached evaluations, optionally substituting one.
    fn loss(&self, replace: Option<(usize, &EllipsoidEval)>) -> f64 {
        let get = |i: usize| match replace {
            Some((j, e)) if j == i => e,
            _ => &self.evals[i],
        };
        let n_ell = self.evals.len();
        let m = self.lattice.len() as f64;
        let n_target = self.target.points.len();

        let forward: f64 = (0..n_ell).map(|i| get(i).to_all).sum::<f64>() / (m * n_ell as f64);
        let mut backward = 0.0;
        for k in 0..n_target {
            let mut best = f64::INFINITY;
            for i in 0..n_ell {
                best = best.min(get(i).from_target[k]);
            }
            backward += best;
        }
        let mut total = 0.5 * (forward + backward / n_target as f64);

        for (i, members) in self.part_members.iter().enumerate() {
            let e = get(i);
            if members.is_empty() {
                // part absent from the points: one-sided penalty against the whole set
                total += e.to_all / m;
                continue;
            }
            let back: f64 = members.iter().map(|&k| e.from_target[k]).sum();
            total += 0.5 * (e.to_part / m + back / members.len() as f64);
        }
        total
    }
}
