use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asset_io::{PartLabeling, TexturedMesh};
use crate::error::{Error, Result};
use crate::Vec3;

/// Points with a part label and the id of the primitive they came from
/// (mesh face for surface samples, ellipsoid index for ellipsoid samples).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointSet {
    pub points: Vec<Vec3>,
    pub labels: Vec<usize>,
    pub source_face: Vec<usize>,
    pub part_names: Vec<String>,
}

impl LabeledPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn part_count(&self) -> usize {
        self.part_names.len()
    }

    /// Indices of the points belonging to each part, in ascending order.
    pub fn part_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.part_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn part_points(&self, part: usize) -> Vec<Vec3> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == part)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Same labels, new positions (e.g. after warping).
    pub fn with_points(&self, points: Vec<Vec3>) -> Self {
        assert_eq!(points.len(), self.points.len());
        Self {
            points,
            labels: self.labels.clone(),
            source_face: self.source_face.clone(),
            part_names: self.part_names.clone(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.points.len();
        if self.labels.len() != n || self.source_face.len() != n {
            return Err(Error::invalid("point set arrays differ in length"));
        }
        if self.labels.iter().any(|&l| l >= self.part_count()) {
            return Err(Error::invalid("point label outside the part alphabet"));
        }
        Ok(())
    }
}

/// Draws `n` points uniformly by area from the mesh surface. Faces are picked
/// proportionally to their area and points placed with uniform barycentric
/// coordinates; each point inherits its face's part label. The result depends
/// only on the inputs and `seed`.
pub fn sample_surface(
    mesh: &TexturedMesh,
    labels: &PartLabeling,
    n: usize,
    seed: u64,
) -> Result<LabeledPointSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if mesh.faces.is_empty() {
        return Err(Error::invalid("cannot sample an empty mesh"));
    }
    labels.check(mesh)?;

    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::invalid("mesh has zero surface area"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut part = Vec::with_capacity(n);
    let mut source_face = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= r).min(mesh.faces.len() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let [a, b, c] = mesh.face_positions(f);
        points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        part.push(labels.face_part[f]);
        source_face.push(f);
    }
    Ok(LabeledPointSet {
        points,
        labels: part,
        source_face,
        part_names: labels.part_names.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset_io::Face;

    fn quad(parts: Option<[usize; 2]>, area_scale: f64) -> (TexturedMesh, PartLabeling) {
        // two triangles; the second one scaled by area_scale
        let k = area_scale.sqrt();
        let mesh = TexturedMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(5.0 + k, 0.0, 0.0),
                Vec3::new(5.0, k, 0.0),
            ],
            uvs: vec![],
            faces: vec![
                Face { v: [0, 1, 2], uv: None },
                Face { v: [3, 4, 5], uv: None },
            ],
            texture: None,
        };
        let labels = match parts {
            Some(p) => PartLabeling {
                part_names: vec!["a".into(), "b".into()],
                face_part: p.to_vec(),
            },
            None => PartLabeling::uniform("all", 2),
        };
        (mesh, labels)
    }

    #[test]
    fn equal_area_split_within_binomial_bound() {
        let (mesh, labels) = quad(None, 1.0);
        let n = 100_000;
        let s = sample_surface(&mesh, &labels, n, 11).unwrap();
        let first = s.source_face.iter().filter(|&&f| f == 0).count() as f64;
        // 5 sigma of Binomial(n, 1/2) is ~791, well inside 2%
        assert!((first - 50_000.0).abs() <= 0.02 * 50_000.0, "{first}");
    }

    #[test]
    fn label_proportions_follow_area() {
        let (mesh, labels) = quad(Some([0, 1]), 3.0);
        let n = 100_000;
        let s = sample_surface(&mesh, &labels, n, 5).unwrap();
        let frac_b = s.labels.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
        assert!((frac_b - 0.75).abs() < 0.02, "{frac_b}");
    }

    #[test]
    fn points_inside_triangle() {
        let mesh = TexturedMesh {
            vertices: vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            uvs: vec![],
            faces: vec![Face { v: [0, 1, 2], uv: None }],
            texture: None,
        };
        let s = sample_surface(&mesh, &PartLabeling::uniform("x", 1), 3, 0).unwrap();
        assert_eq!(s.len(), 3);
        for p in &s.points {
            // barycentric coordinates for this right triangle
            let (b1, b2) = (p.x / 2.0, p.y);
            let b0 = 1.0 - b1 - b2;
            assert!(b0 >= -1e-15 && b1 >= 0.0 && b2 >= 0.0);
            assert_eq!(p.z, 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (mesh, labels) = quad(Some([1, 0]), 2.0);
        let a = sample_surface(&mesh, &labels, 500, 42).unwrap();
        let b = sample_surface(&mesh, &labels, 500, 42).unwrap();
        let c = sample_surface(&mesh, &labels, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn rejects_zero_count() {
        let (mesh, labels) = quad(None, 1.0);
        assert!(sample_surface(&mesh, &labels, 0, 0).is_err());
    }
}
