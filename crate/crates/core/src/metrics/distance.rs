//! Chamfer-type distances, the part-aware distance, the symmetry distance and
//! the F-score.
//!
//! Per-point nearest-neighbor work runs in parallel; every reduction sums in
//! point index order so results do not depend on the thread count.

use log::warn;
use rayon::prelude::*;

use super::index::{Metric, NnIndex};
use super::sampling::LabeledPointSet;
use crate::error::{Error, Result};
use crate::Vec3;

/// Nearest neighbor in `index` for every query point, in query order.
pub fn nearest_all(queries: &[Vec3], index: &NnIndex, metric: Metric) -> Vec<(usize, f64)> {
    queries
        .par_iter()
        .map(|q| index.nearest(q, metric).expect("non-empty index"))
        .collect()
}

/// Mean nearest-neighbor distance from `queries` to `index`.
pub fn mean_nearest(queries: &[Vec3], index: &NnIndex, metric: Metric) -> f64 {
    let d = nearest_all(queries, index, metric);
    let sum: f64 = d.iter().map(|x| x.1).sum();
    sum / queries.len() as f64
}

fn nonempty(name: &str, pts: &[Vec3]) -> Result<()> {
    if pts.is_empty() {
        return Err(Error::invalid(format!("{name} point set is empty")));
    }
    Ok(())
}

fn symmetric_chamfer(p: &[Vec3], q: &[Vec3], metric: Metric) -> Result<f64> {
    nonempty("first", p)?;
    nonempty("second", q)?;
    let ip = NnIndex::build(p);
    let iq = NnIndex::build(q);
    Ok(0.5 * (mean_nearest(p, &iq, metric) + mean_nearest(q, &ip, metric)))
}

/// Averaged L1-Chamfer distance: the mean coordinate-wise L1 distance from
/// each set to the other, averaged over both directions.
pub fn chamfer_l1(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    symmetric_chamfer(p, q, Metric::L1)
}

/// Chamfer distance with squared Euclidean point distances, averaged over
/// both directions.
pub fn chamfer_l2(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    symmetric_chamfer(p, q, Metric::L2Squared)
}

/// How a part that has points on only one side contributes to
/// [`part_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPart {
    /// Mean L1 distance from the non-empty side to the whole other set.
    #[default]
    Penalize,
    Ignore,
}

/// Per-term breakdown of the part-aware distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PartDistance {
    pub global: f64,
    pub parts: Vec<f64>,
    pub total: f64,
}

/// Global Chamfer-L1 plus the sum of per-part Chamfer-L1 terms.
pub fn part_distance(p: &LabeledPointSet, q: &LabeledPointSet) -> Result<f64> {
    Ok(part_distance_terms(p, q, MissingPart::Penalize)?.total)
}

pub fn part_distance_terms(
    p: &LabeledPointSet,
    q: &LabeledPointSet,
    missing: MissingPart,
) -> Result<PartDistance> {
    if p.part_names != q.part_names {
        return Err(Error::invalid(format!(
            "part alphabets differ: {:?} vs {:?}",
            p.part_names, q.part_names
        )));
    }
    nonempty("first", &p.points)?;
    nonempty("second", &q.points)?;
    let ip = NnIndex::build(&p.points);
    let iq = NnIndex::build(&q.points);
    let global = 0.5
        * (mean_nearest(&p.points, &iq, Metric::L1) + mean_nearest(&q.points, &ip, Metric::L1));

    let p_parts = p.part_indices();
    let q_parts = q.part_indices();
    let mut parts = Vec::with_capacity(p.part_count());
    for (pi, qi) in p_parts.iter().zip(&q_parts) {
        let term = match (pi.is_empty(), qi.is_empty()) {
            (true, true) => 0.0,
            (false, false) => {
                let a: Vec<Vec3> = pi.iter().map(|&i| p.points[i]).collect();
                let b: Vec<Vec3> = qi.iter().map(|&i| q.points[i]).collect();
                let ia = NnIndex::build(&a);
                let ib = NnIndex::build(&b);
                0.5 * (mean_nearest(&a, &ib, Metric::L1) + mean_nearest(&b, &ia, Metric::L1))
            }
            (false, true) => match missing {
                MissingPart::Ignore => 0.0,
                MissingPart::Penalize => {
                    let a: Vec<Vec3> = pi.iter().map(|&i| p.points[i]).collect();
                    mean_nearest(&a, &iq, Metric::L1)
                }
            },
            (true, false) => match missing {
                MissingPart::Ignore => 0.0,
                MissingPart::Penalize => {
                    let b: Vec<Vec3> = qi.iter().map(|&i| q.points[i]).collect();
                    mean_nearest(&b, &ip, Metric::L1)
                }
            },
        };
        parts.push(term);
    }
    let total = global + parts.iter().sum::<f64>();
    Ok(PartDistance {
        global,
        parts,
        total,
    })
}

/// Reflection plane `normal · x = offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryPlane {
    pub normal: Vec3,
    pub offset: f64,
}

impl SymmetryPlane {
    /// Builds a plane, normalizing a non-unit normal (with a warning).
    pub fn new(normal: Vec3, offset: f64) -> std::result::Result<Self, String> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() || !offset.is_finite() {
            return Err(format!("invalid symmetry plane normal {normal:?}"));
        }
        if (len - 1.0).abs() > 1e-12 {
            warn!("symmetry plane normal has length {len}; normalizing");
        }
        Ok(Self {
            normal: normal / len,
            offset: offset / len,
        })
    }

    /// Parses `"x=0"`, `"y=-0.5"`, `"nx,ny,nz,d"`, or `"none"`.
    pub fn parse(s: &str) -> std::result::Result<Option<Self>, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(None);
        }
        if let Some((axis, value)) = s.split_once('=') {
            let normal = match axis.trim() {
                "x" => Vec3::x(),
                "y" => Vec3::y(),
                "z" => Vec3::z(),
                other => return Err(format!("unknown symmetry axis '{other}'")),
            };
            let offset: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("bad symmetry offset '{value}'"))?;
            return Self::new(normal, offset).map(Some);
        }
        let nums: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("bad symmetry plane '{s}'"))?;
        if nums.len() != 4 {
            return Err(format!("symmetry plane '{s}' needs 4 numbers"));
        }
        Self::new(Vec3::new(nums[0], nums[1], nums[2]), nums[3]).map(Some)
    }

    #[inline]
    pub fn reflect(&self, p: &Vec3) -> Vec3 {
        p - self.normal * (2.0 * (self.normal.dot(p) - self.offset))
    }
}

/// Chamfer-L1 distance between a point set and its mirror image.
pub fn symmetry_distance(p: &[Vec3], plane: &SymmetryPlane) -> Result<f64> {
    let mirrored: Vec<Vec3> = p.iter().map(|x| plane.reflect(x)).collect();
    chamfer_l1(p, &mirrored)
}

/// Precision/recall at Euclidean threshold `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// F-score of `pred` against `gt`: harmonic mean of the fraction of `pred`
/// within `tau` of `gt` and the fraction of `gt` within `tau` of `pred`.
pub fn f_score(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<FScore> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("F-score threshold must be positive, got {tau}")));
    }
    nonempty("predicted", pred)?;
    nonempty("ground-truth", gt)?;
    let tau2 = tau * tau;
    let within = |from: &[Vec3], to: &NnIndex| {
        nearest_all(from, to, Metric::L2Squared)
            .iter()
            .filter(|(_, d)| *d <= tau2)
            .count() as f64
            / from.len() as f64
    };
    let precision = within(pred, &NnIndex::build(gt));
    let recall = within(gt, &NnIndex::build(pred));
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore {
        precision,
        recall,
        f_score: f,
    })
}

/// Diagonal length of the axis-aligned bounding box.
pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    match crate::asset_io::bounding_box(points) {
        Some((lo, hi)) => (hi - lo).norm(),
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    fn labeled(points: Vec<Vec3>, labels: Vec<usize>, parts: usize) -> LabeledPointSet {
        LabeledPointSet {
            source_face: vec![0; points.len()],
            points,
            labels,
            part_names: (0..parts).map(|i| format!("p{i}")).collect(),
        }
    }

    #[test]
    fn chamfer_identity_and_single_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_points(&mut rng, 40);
        assert_eq!(chamfer_l1(&p, &p).unwrap(), 0.0);
        let a = [Vec3::zeros()];
        let b = [Vec3::new(1.0, 2.0, 0.0)];
        assert_eq!(chamfer_l1(&a, &b).unwrap(), 3.0);
        assert_eq!(chamfer_l2(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn chamfer_empty_is_error() {
        assert!(chamfer_l1(&[], &[Vec3::zeros()]).is_err());
        assert!(chamfer_l1(&[Vec3::zeros()], &[]).is_err());
    }

    #[test]
    fn single_part_is_twice_chamfer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_points(&mut rng, 60);
        let q = random_points(&mut rng, 45);
        let ch = chamfer_l1(&p, &q).unwrap();
        let d = part_distance(&labeled(p, vec![0; 60], 1), &labeled(q, vec![0; 45], 1)).unwrap();
        assert_eq!(d, 2.0 * ch);
    }

    #[test]
    fn part_distance_zero_on_identity_and_alphabet_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 30);
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let p = labeled(pts, labels, 3);
        assert_eq!(part_distance(&p, &p).unwrap(), 0.0);
        let mut q = p.clone();
        q.part_names[2] = "other".into();
        assert!(part_distance(&p, &q).is_err());
    }

    #[test]
    fn one_sided_part_penalty() {
        // part 1 exists only in p
        let p = labeled(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)], vec![0, 1], 3);
        let q = labeled(vec![Vec3::new(0.0, 0.5, 0.0)], vec![0], 3);
        let t = part_distance_terms(&p, &q, MissingPart::Penalize).unwrap();
        assert_eq!(t.parts[2], 0.0);
        assert_eq!(t.parts[1], 2.5);
        let t = part_distance_terms(&p, &q, MissingPart::Ignore).unwrap();
        assert_eq!(t.parts[1], 0.0);
        // and the mirrored case
        let t = part_distance_terms(&q, &p, MissingPart::Penalize).unwrap();
        assert_eq!(t.parts[1], 2.5);
    }

    #[test]
    fn symmetry_cases() {
        let plane = SymmetryPlane::parse("x=0").unwrap().unwrap();
        assert_eq!(symmetry_distance(&[Vec3::new(1.0, 0.0, 0.0)], &plane).unwrap(), 2.0);
        let sym = vec![
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(-1.0, 2.0, 3.0),
            Vec3::new(0.0, 5.0, 1.0),
        ];
        assert_eq!(symmetry_distance(&sym, &plane).unwrap(), 0.0);
    }

    #[test]
    fn plane_parsing() {
        let p = SymmetryPlane::parse("y = 0.5").unwrap().unwrap();
        assert_eq!(p.normal, Vec3::y());
        assert_eq!(p.offset, 0.5);
        let p = SymmetryPlane::parse("0,0,2,1").unwrap().unwrap();
        assert_eq!(p.normal, Vec3::z());
        assert_eq!(p.offset, 0.5);
        assert_eq!(p.reflect(&Vec3::new(1.0, 1.0, 0.0)), Vec3::new(1.0, 1.0, 1.0));
        assert!(SymmetryPlane::parse("none").unwrap().is_none());
        assert!(SymmetryPlane::parse("0,0,0,1").is_err());
        assert!(SymmetryPlane::parse("q=1").is_err());
        assert!(SymmetryPlane::parse("1,2").is_err());
    }

    #[test]
    fn f_score_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_points(&mut rng, 50);
        assert_eq!(f_score(&p, &p, 1e-9).unwrap().f_score, 1.0);
        let far: Vec<Vec3> = p.iter().map(|x| x + Vec3::new(100.0, 0.0, 0.0)).collect();
        assert_eq!(f_score(&p, &far, 1e-3).unwrap().f_score, 0.0);
        assert!(f_score(&p, &p, 0.0).is_err());
        assert!(f_score(&[], &p, 1.0).is_err());
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_points(&mut rng, 80);
        let q = random_points(&mut rng, 70);
        let t = Vec3::new(0.25, -0.5, 0.125);
        let pt: Vec<Vec3> = p.iter().map(|x| x + t).collect();
        let qt: Vec<Vec3> = q.iter().map(|x| x + t).collect();
        let a = chamfer_l1(&p, &q).unwrap();
        let b = chamfer_l1(&pt, &qt).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
