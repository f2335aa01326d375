use rayon::prelude::*;

use super::Ellipsoid;
use crate::Vec3;

/// Below this total Gaussian mass the blend falls back to the nearest
/// ellipsoid in the Mahalanobis sense.
pub const UNDERFLOW_MASS: f64 = 1e-30;

/// Normalized skinning weights of one point: non-negative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendWeights(pub Vec<f64>);

impl BlendWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Quadratic form `(p-T)^T Sigma^-1 (p-T)` of the ellipsoid-aligned Gaussian
/// with covariance `Sigma = lambda * (R S)(R S)^T`.
#[inline]
pub fn gaussian_exponent(p: &Vec3, e: &Ellipsoid, lambda: f64) -> f64 {
    e.implicit(p) / lambda
}

/// Unnormalized Gaussian `exp(-q/2)`, equal to 1 at the ellipsoid center.
#[inline]
pub fn gaussian_weight(p: &Vec3, e: &Ellipsoid, lambda: f64) -> f64 {
    (-0.5 * gaussian_exponent(p, e, lambda)).exp()
}

/// Normalized blend of all ellipsoid Gaussians at `p`.
pub fn blend_weights(p: &Vec3, ells: &[Ellipsoid], lambda: f64) -> BlendWeights {
    assert!(!ells.is_empty(), "blend field needs at least one ellipsoid");
    let q: Vec<f64> = ells.iter().map(|e| gaussian_exponent(p, e, lambda)).collect();
    let g: Vec<f64> = q.iter().map(|&x| (-0.5 * x).exp()).collect();
    let total: f64 = g.iter().sum();
    if total < UNDERFLOW_MASS || !total.is_finite() {
        // lowest index wins ties
        let mut best = 0;
        for (i, &x) in q.iter().enumerate() {
            if x < q[best] {
                best = i;
            }
        }
        let mut w = vec![0.0; ells.len()];
        w[best] = 1.0;
        return BlendWeights(w);
    }
    BlendWeights(g.iter().map(|&x| x / total).collect())
}

/// Blend weights for many points, in input order.
pub fn blend_field(points: &[Vec3], ells: &[Ellipsoid], lambda: f64) -> Vec<BlendWeights> {
    points.par_iter().map(|p| blend_weights(p, ells, lambda)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mat3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn peak_and_unit_sphere_value() {
        let e = Ellipsoid::sphere(Vec3::new(1.0, -1.0, 2.0), 1.0);
        assert_eq!(gaussian_weight(&e.center, &e, 4.0), 1.0);
        let p = e.center + Vec3::new(0.0, 2.0, 0.0);
        // (p-T)^T Sigma^-1 (p-T) = 4 / 4
        assert!((gaussian_weight(&p, &e, 4.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn anisotropic_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let rot = nalgebra::Rotation3::from_euler_angles(rng.gen(), rng.gen(), rng.gen());
            let e = Ellipsoid {
                center: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                rotation: *rot.matrix(),
                semi_axes: Vec3::new(rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)),
            };
            let lambda = rng.gen_range(0.5..6.0);
            let s = Mat3::from_diagonal(&e.semi_axes);
            let a = e.rotation * s;
            let sigma = (a * a.transpose()) * lambda;
            let inv = sigma.try_inverse().unwrap();
            let p = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let d = p - e.center;
            let expected = (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp();
            let got = gaussian_weight(&p, &e, lambda);
            assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300), "{got} {expected}");
        }
    }

    #[test]
    fn one_and_two_ellipsoids() {
        let e = Ellipsoid::sphere(Vec3::zeros(), 0.3);
        let p = Vec3::new(0.7, 0.1, -0.2);
        assert_eq!(blend_weights(&p, &[e], 4.0).0, vec![1.0]);
        assert_eq!(blend_weights(&p, &[e, e], 4.0).0, vec![0.5, 0.5]);
    }

    #[test]
    fn underflow_falls_back_to_nearest() {
        let a = Ellipsoid::sphere(Vec3::zeros(), 0.01);
        let b = Ellipsoid::sphere(Vec3::new(1.0, 0.0, 0.0), 0.01);
        let p = Vec3::new(50.0, 0.0, 0.0);
        let g: f64 = [a, b].iter().map(|e| gaussian_weight(&p, e, 4.0)).sum();
        assert!(g < UNDERFLOW_MASS);
        assert_eq!(blend_weights(&p, &[a, b], 4.0).0, vec![0.0, 1.0]);
        // exact tie picks the lowest index
        let mid = Vec3::new(0.5, 300.0, 0.0);
        assert_eq!(blend_weights(&mid, &[a, b], 4.0).0, vec![1.0, 0.0]);
    }

    #[test]
    fn rigid_invariance() {
        let e = Ellipsoid {
            center: Vec3::new(0.1, 0.2, 0.3),
            rotation: *nalgebra::Rotation3::from_euler_angles(0.5, 0.1, 0.9).matrix(),
            semi_axes: Vec3::new(0.4, 1.2, 0.7),
        };
        let rot = *nalgebra::Rotation3::from_euler_angles(-1.0, 0.3, 2.0).matrix();
        let t = Vec3::new(3.0, -1.0, 0.5);
        let moved = Ellipsoid {
            center: rot * e.center + t,
            rotation: rot * e.rotation,
            semi_axes: e.semi_axes,
        };
        let p = Vec3::new(0.9, -0.4, 1.1);
        let a = gaussian_weight(&p, &e, 4.0);
        let b = gaussian_weight(&(rot * p + t), &moved, 4.0);
        assert!((a - b).abs() < 1e-9);
    }
}
