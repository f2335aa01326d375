use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::asset_io::{PartLabeling, TexturedMesh};
use crate::metrics::{bbox_diagonal, sample_surface, LabeledPointSet};
use crate::{Mat3, Vec3};

/// Smallest semi-axis allowed, relative to the part's bounding-box diagonal.
pub const SEMI_AXIS_FLOOR_FRACTION: f64 = 1e-4;
/// Absolute lower bound for fully degenerate parts (a single point).
pub const SEMI_AXIS_FLOOR_ABS: f64 = 1e-9;

/// Ellipsoid given as the image of the unit sphere under `u -> center +
/// rotation * diag(semi_axes) * u`. Columns of `rotation` are the principal
/// axes in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub rotation: Mat3,
    pub semi_axes: Vec3,
}

impl Ellipsoid {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self {
            center,
            rotation: Mat3::identity(),
            semi_axes: Vec3::repeat(radius),
        }
    }

    /// Squared Mahalanobis-style distance `(p-T)^T (R S^2 R^T)^-1 (p-T)`, i.e.
    /// the implicit function of the ellipsoid (1 on its surface).
    #[inline]
    pub fn implicit(&self, p: &Vec3) -> f64 {
        let local = self.rotation.transpose() * (p - self.center);
        let q = local.component_div(&self.semi_axes);
        q.norm_squared()
    }

    /// `R * S`, the linear part of the unit-sphere map.
    pub fn linear_map(&self) -> Mat3 {
        self.rotation * Mat3::from_diagonal(&self.semi_axes)
    }

    /// Point on the surface for a unit direction `u` in the local frame.
    #[inline]
    pub fn map_unit(&self, u: &Vec3) -> Vec3 {
        self.center + self.rotation * u.component_mul(&self.semi_axes)
    }

    pub fn is_valid(&self) -> bool {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Mat3::identity()).amax() <= 1e-6;
        ortho
            && (r.determinant() - 1.0).abs() <= 1e-6
            && self.semi_axes.iter().all(|&s| s > 0.0 && s.is_finite())
            && self.center.iter().all(|c| c.is_finite())
    }
}

/// Moment-matched ellipsoid: center at the mean, axes along the principal
/// directions of the covariance (largest first), semi-axis `sqrt(5 * var)`
/// per axis, which is exact for points uniform in a solid ellipsoid.
pub fn fit_ellipsoid(points: &[Vec3]) -> Result<Ellipsoid> {
    if points.is_empty() {
        return Err(Error::invalid("cannot fit an ellipsoid to zero points"));
    }
    let n = points.len() as f64;
    // mean relative to the first point: exact for repeated points
    let origin = points[0];
    let center = origin + points.iter().fold(Vec3::zeros(), |a, p| a + (p - origin)) / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - center;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut axes = [Vec3::zeros(); 2];
    for (k, &i) in order.iter().take(2).enumerate() {
        axes[k] = canonical_sign(eig.eigenvectors.column(i).into_owned());
    }
    // third axis from the cross product keeps the frame right-handed
    let third = axes[0].cross(&axes[1]).normalize();
    let rotation = orthonormalize(&Mat3::from_columns(&[axes[0], axes[1], third]));

    let floor = (SEMI_AXIS_FLOOR_FRACTION * bbox_diagonal(points)).max(SEMI_AXIS_FLOOR_ABS);
    let semi_axes = Vec3::from_fn(|k, _| {
        let var = eig.eigenvalues[order[k]].max(0.0);
        (5.0f64.sqrt() * var.sqrt()).max(floor)
    });
    Ok(Ellipsoid {
        center,
        rotation,
        semi_axes,
    })
}

/// Flips `v` so its first component with magnitude above 1e-12 is positive.
fn canonical_sign(v: Vec3) -> Vec3 {
    match v.iter().find(|c| c.abs() > 1e-12) {
        Some(&c) if c < 0.0 => -v,
        _ => v,
    }
}

/// Gram-Schmidt on the columns, with the third column rebuilt as a cross
/// product so the result is a proper rotation.
pub fn orthonormalize(m: &Mat3) -> Mat3 {
    let c0 = m.column(0).normalize();
    let c1 = m.column(1) - c0 * c0.dot(&m.column(1));
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Mat3::from_columns(&[c0, c1, c2])
}

/// One ellipsoid per part of `set`, fitted to that part's points.
pub fn fit_part_ellipsoids(set: &LabeledPointSet) -> Result<Vec<Ellipsoid>> {
    let mut out = Vec::with_capacity(set.part_count());
    for (i, name) in set.part_names.iter().enumerate() {
        let pts = set.part_points(i);
        if pts.is_empty() {
            return Err(Error::invalid(format!("part '{name}' has no sample points")));
        }
        out.push(fit_ellipsoid(&pts)?);
    }
    Ok(out)
}

/// One ellipsoid per labeled part, each fitted to `samples_per_part` points
/// drawn from that part's faces only, so small parts are never missed.
pub fn fit_mesh_part_ellipsoids(
    mesh: &TexturedMesh,
    labels: &PartLabeling,
    samples_per_part: usize,
    seed: u64,
) -> Result<Vec<Ellipsoid>> {
    labels.check(mesh)?;
    let mut out = Vec::with_capacity(labels.part_count());
    for (i, name) in labels.part_names.iter().enumerate() {
        let faces: Vec<_> = mesh
            .faces
            .iter()
            .zip(&labels.face_part)
            .filter(|(_, &p)| p == i)
            .map(|(f, _)| *f)
            .collect();
        if faces.is_empty() {
            return Err(Error::invalid(format!("part '{name}' has no faces")));
        }
        let sub = TexturedMesh {
            faces,
            texture: None,
            ..mesh.clone()
        };
        let sub_labels = PartLabeling::uniform(name, sub.faces.len());
        let pts = sample_surface(&sub, &sub_labels, samples_per_part, seed.wrapping_add(i as u64))?;
        out.push(fit_ellipsoid(&pts.points)?);
    }
    Ok(out)
}

/// `m` points on the ellipsoid surface: a spherical Fibonacci lattice pushed
/// through the unit-sphere map. Not area-uniform for anisotropic ellipsoids.
pub fn sample_ellipsoid_surface(e: &Ellipsoid, m: usize) -> Vec<Vec3> {
    fibonacci_sphere(m).iter().map(|u| e.map_unit(u)).collect()
}

pub fn fibonacci_sphere(m: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..m)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Surface samples of all ellipsoids, labeled by ellipsoid (= part) index.
/// `source_face` holds the ellipsoid index as well.
pub fn ellipsoid_point_set(ells: &[Ellipsoid], per_ellipsoid: usize, part_names: &[String]) -> LabeledPointSet {
    let lattice = fibonacci_sphere(per_ellipsoid);
    let mut points = Vec::with_capacity(ells.len() * per_ellipsoid);
    let mut labels = Vec::with_capacity(points.capacity());
    for (i, e) in ells.iter().enumerate() {
        points.extend(lattice.iter().map(|u| e.map_unit(u)));
        labels.extend(std::iter::repeat_n(i, per_ellipsoid));
    }
    LabeledPointSet {
        source_face: labels.clone(),
        points,
        labels,
        part_names: part_names.to_vec(),
    }
}

#[derive(Serialize, Deserialize)]
struct EllipsoidRecord {
    part: String,
    center: [f64; 3],
    rotation: [[f64; 3]; 3],
    semi_axes: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct EllipsoidDoc {
    ellipsoids: Vec<EllipsoidRecord>,
}

/// JSON document with the center, rotation rows and semi-axes per part.
pub fn ellipsoids_to_json(ells: &[Ellipsoid], part_names: &[String]) -> String {
    let doc = EllipsoidDoc {
        ellipsoids: ells
            .iter()
            .zip(part_names)
            .map(|(e, name)| EllipsoidRecord {
                part: name.clone(),
                center: e.center.into(),
                rotation: [0, 1, 2].map(|r| [0, 1, 2].map(|c| e.rotation[(r, c)])),
                semi_axes: e.semi_axes.into(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("ellipsoids serialize")
}

pub fn ellipsoids_from_json(text: &str) -> Result<(Vec<Ellipsoid>, Vec<String>)> {
    let doc: EllipsoidDoc = serde_json::from_str(text).map_err(|e| Error::invalid(format!("ellipsoids: {e}")))?;
    let mut ells = Vec::new();
    let mut names = Vec::new();
    for r in doc.ellipsoids {
        let e = Ellipsoid {
            center: r.center.into(),
            rotation: Mat3::from_fn(|i, j| r.rotation[i][j]),
            semi_axes: r.semi_axes.into(),
        };
        if !e.is_valid() {
            return Err(Error::invalid(format!("ellipsoid for part '{}' is not valid", r.part)));
        }
        ells.push(e);
        names.push(r.part);
    }
    Ok((ells, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if p.norm_squared() <= 1.0 {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn unit_ball_fits_unit_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let e = fit_ellipsoid(&uniform_ball(&mut rng, 100_000)).unwrap();
        for s in e.semi_axes.iter() {
            assert!((s - 1.0).abs() < 0.02, "{:?}", e.semi_axes);
        }
        assert!(e.is_valid());
    }

    #[test]
    fn segment_fit_matches_covariance_oracle() {
        let n = 1001;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| Vec3::new(-1.0 + 2.0 * i as f64 / (n - 1) as f64, 0.0, 0.0))
            .collect();
        // brute-force variance along x
        let mean = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
        let var = pts.iter().map(|p| (p.x - mean).powi(2)).sum::<f64>() / n as f64;
        let e = fit_ellipsoid(&pts).unwrap();
        assert!((e.semi_axes[0] - (5.0 * var).sqrt()).abs() < 1e-12);
        let floor = 1e-4 * 2.0;
        assert!((e.semi_axes[1] - floor).abs() < 1e-15);
        assert!((e.semi_axes[2] - floor).abs() < 1e-15);
        // first axis is +x after the sign convention
        assert!((e.rotation.column(0) - Vec3::x()).norm() < 1e-12);
        assert!(e.is_valid());
    }

    #[test]
    fn repeated_point_degenerates_to_floor() {
        let p = Vec3::new(0.3, -2.0, 5.0);
        let e = fit_ellipsoid(&vec![p; 17]).unwrap();
        assert_eq!(e.center, p);
        assert_eq!(e.semi_axes, Vec3::repeat(SEMI_AXIS_FLOOR_ABS));
        assert!(e.is_valid());
        assert!(fit_ellipsoid(&[]).is_err());
    }

    #[test]
    fn axes_ordered_and_right_handed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let pts: Vec<Vec3> = uniform_ball(&mut rng, 20_000)
            .into_iter()
            .map(|p| rot * Vec3::new(3.0 * p.x, 2.0 * p.y, 0.5 * p.z) + Vec3::new(1.0, 2.0, 3.0))
            .collect();
        let e = fit_ellipsoid(&pts).unwrap();
        assert!(e.semi_axes[0] > e.semi_axes[1] && e.semi_axes[1] > e.semi_axes[2]);
        assert!((e.rotation.determinant() - 1.0).abs() < 1e-12);
        let expected = rot * Vec3::x();
        assert!(e.rotation.column(0).dot(&expected).abs() > 0.999);
        for k in 0..2 {
            let c = e.rotation.column(k);
            let first = c.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.gen::<f64>() * 3.0, rng.gen(), rng.gen::<f64>() * 0.2))
            .collect();
        let t = Vec3::new(10.0, -4.0, 2.5);
        let shifted: Vec<Vec3> = pts.iter().map(|p| p + t).collect();
        let a = fit_ellipsoid(&pts).unwrap();
        let b = fit_ellipsoid(&shifted).unwrap();
        assert!((b.center - a.center - t).norm() < 1e-9);
        assert!((b.rotation - a.rotation).amax() < 1e-9);
        assert!((b.semi_axes - a.semi_axes).amax() < 1e-9);
    }

    #[test]
    fn sphere_samples_on_surface() {
        let e = Ellipsoid::sphere(Vec3::new(1.0, 2.0, 3.0), 1.0);
        for m in [1, 2, 7, 512] {
            let s = sample_ellipsoid_surface(&e, m);
            assert_eq!(s.len(), m);
            for p in s {
                assert!(((p - e.center).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anisotropic_samples_lie_on_the_surface() {
        let e = Ellipsoid {
            center: Vec3::new(0.5, 0.0, -1.0),
            rotation: *nalgebra::Rotation3::from_euler_angles(0.2, 0.4, -0.3).matrix(),
            semi_axes: Vec3::new(2.0, 1.0, 1.0),
        };
        for p in sample_ellipsoid_surface(&e, 300) {
            // independent check through the explicit inverse quadratic form
            let a = e.linear_map();
            let inv = (a * a.transpose()).try_inverse().unwrap();
            let d = p - e.center;
            assert!(((d.transpose() * inv * d)[(0, 0)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn json_round_trip() {
        let e = Ellipsoid {
            center: Vec3::new(0.5, 0.25, -1.0),
            rotation: *nalgebra::Rotation3::from_euler_angles(0.2, 0.4, -0.3).matrix(),
            semi_axes: Vec3::new(2.0, 1.0, 0.5),
        };
        let names = vec!["body".to_string()];
        let text = ellipsoids_to_json(&[e], &names);
        let (back, n) = ellipsoids_from_json(&text).unwrap();
        assert_eq!(n, names);
        assert_eq!(back[0], e);
    }
}
