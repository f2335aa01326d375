use nalgebra::SymmetricEigen;
use serde::Deserialize;

use crate::asset_io::{Mask, TextureImage, TexturedMesh};
use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Fewest masked pixels [`color_stats`] accepts.
pub const MIN_STATS_PIXELS: usize = 4;
/// Eigenvalue floor applied to the source covariance before whitening.
pub const WCT_EIGEN_FLOOR: f64 = 1e-6;

/// Masked color moments, population form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorStats {
    pub mean: Vec3,
    pub covariance: Mat3,
    pub pixel_count: usize,
}

/// Per-pixel color map `c ↦ clamp(linear·c + bias, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTransform {
    pub linear: Mat3,
    pub bias: Vec3,
}

impl Default for ColorTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl ColorTransform {
    pub fn identity() -> Self {
        Self {
            linear: Mat3::identity(),
            bias: Vec3::zeros(),
        }
    }

    /// The affine part, before clamping.
    pub fn apply_unclamped(&self, c: &Vec3) -> Vec3 {
        self.linear * c + self.bias
    }

    pub fn apply(&self, c: [f64; 3]) -> [f64; 3] {
        let y = self.apply_unclamped(&Vec3::from(c));
        [y.x.clamp(0.0, 1.0), y.y.clamp(0.0, 1.0), y.z.clamp(0.0, 1.0)]
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    /// Row-major linear entries followed by the bias.
    pub fn to_params(&self) -> [f64; 12] {
        let mut p = [0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                p[3 * r + c] = self.linear[(r, c)];
            }
            p[9 + r] = self.bias[r];
        }
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        assert_eq!(p.len(), 12, "color transform has 12 parameters");
        Self {
            linear: Mat3::from_row_slice(&p[..9]),
            bias: Vec3::new(p[9], p[10], p[11]),
        }
    }

    /// `{"linear": [[..], [..], [..]], "bias": [..]}` with rows of the matrix.
    pub fn to_json(&self) -> String {
        let rows: Vec<[f64; 3]> = (0..3)
            .map(|r| [self.linear[(r, 0)], self.linear[(r, 1)], self.linear[(r, 2)]])
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "linear": rows,
            "bias": [self.bias.x, self.bias.y, self.bias.z],
        }))
        .expect("transform serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            linear: [[f64; 3]; 3],
            bias: [f64; 3],
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::invalid(format!("color transform: {e}")))?;
        let t = Self {
            linear: Mat3::from_fn(|r, c| doc.linear[r][c]),
            bias: Vec3::from(doc.bias),
        };
        if !t.is_finite() {
            return Err(Error::invalid("color transform has non-finite entries"));
        }
        Ok(t)
    }
}

/// Mean and covariance of the masked pixels, computed in two passes.
pub fn color_stats(pixels: &[[f64; 3]], mask: &[bool]) -> Result<ColorStats> {
    if pixels.len() != mask.len() {
        return Err(Error::invalid(format!(
            "{} pixels but {} mask entries",
            pixels.len(),
            mask.len()
        )));
    }
    let selected = || pixels.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| Vec3::from(*p));
    let n = mask.iter().filter(|&&m| m).count();
    if n < MIN_STATS_PIXELS {
        return Err(Error::invalid(format!(
            "{n} masked pixels; color statistics need at least {MIN_STATS_PIXELS}"
        )));
    }
    // anchored at the first pixel so constant regions come out exact
    let anchor = selected().next().expect("n >= 1");
    let mean = anchor + selected().fold(Vec3::zeros(), |a, p| a + (p - anchor)) / n as f64;
    let mut covariance = selected().fold(Mat3::zeros(), |a, p| {
        let d = p - mean;
        a + d * d.transpose()
    }) / n as f64;
    covariance = 0.5 * (covariance + covariance.transpose());
    Ok(ColorStats {
        mean,
        covariance,
        pixel_count: n,
    })
}

/// [`color_stats`] of an image under a mask of the same size.
pub fn image_stats(image: &TextureImage, mask: &Mask) -> Result<ColorStats> {
    check_dims(image, mask)?;
    color_stats(&image.pixels, &mask.bits)
}

fn check_dims(image: &TextureImage, mask: &Mask) -> Result<()> {
    if (image.width, image.height) != (mask.width, mask.height) {
        return Err(Error::invalid(format!(
            "image is {}x{} but mask is {}x{}",
            image.width, image.height, mask.width, mask.height
        )));
    }
    Ok(())
}

/// Symmetric matrix function through the eigendecomposition, with
/// eigenvalues floored at `floor` first.
fn sym_fn(m: &Mat3, floor: f64, f: impl Fn(f64) -> f64) -> Mat3 {
    let eig = SymmetricEigen::new(0.5 * (m + m.transpose()));
    let d = Mat3::from_diagonal(&eig.eigenvalues.map(|l| f(l.max(floor))));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Whitening–coloring transform: `linear = Σ_t^{1/2} Σ_s^{-1/2}`,
/// `bias = μ_t − linear·μ_s`. Source eigenvalues below
/// [`WCT_EIGEN_FLOOR`] are raised to it before inversion.
pub fn solve_wct(src: &ColorStats, tgt: &ColorStats) -> ColorTransform {
    let whiten = sym_fn(&src.covariance, WCT_EIGEN_FLOOR, |l| 1.0 / l.sqrt());
    let color = sym_fn(&tgt.covariance, 0.0, f64::sqrt);
    let linear = color * whiten;
    ColorTransform {
        linear,
        bias: tgt.mean - linear * src.mean,
    }
}

/// Transforms and clamps the masked texels; the rest are copied.
pub fn apply_color_transform(texture: &TextureImage, mask: &Mask, t: &ColorTransform) -> Result<TextureImage> {
    check_dims(texture, mask)?;
    Ok(TextureImage {
        width: texture.width,
        height: texture.height,
        pixels: texture
            .pixels
            .iter()
            .zip(&mask.bits)
            .map(|(p, &m)| if m { t.apply(*p) } else { *p })
            .collect(),
    })
}

/// Texels whose centers lie in at least one face's UV triangle (edges
/// inclusive). Faces without UVs are skipped.
pub fn uv_coverage_mask(mesh: &TexturedMesh, width: usize, height: usize) -> Result<Mask> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("coverage mask size must be positive"));
    }
    let mut mask = Mask::new(width, height, false);
    let mut mapped = 0;
    for f in &mesh.faces {
        let Some(t) = f.uv else { continue };
        mapped += 1;
        // texel space: x = u·W, y = (1 − v)·H
        let p = t.map(|i| {
            let [u, v] = mesh.uvs[i];
            (u * width as f64, (1.0 - v) * height as f64)
        });
        let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[1].1 - p[0].1) * (p[2].0 - p[0].0);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let lo_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
        let hi_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
        let lo_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
        let hi_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (lo_x - 0.5).ceil().max(0.0) as usize;
        let y0 = (lo_y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((hi_x - 0.5).floor().min(width as f64 - 1.0)).max(-1.0);
        let y1 = ((hi_y - 0.5).floor().min(height as f64 - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let c = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = (0..3).all(|k| {
                    let a = p[k];
                    let b = p[(k + 1) % 3];
                    ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)) * area.signum() >= 0.0
                });
                if inside {
                    mask.bits[y * width + x] = true;
                }
            }
        }
    }
    if mapped == 0 {
        return Err(Error::invalid("mesh has no UV-mapped faces"));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset_io::Face;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, scale: f64) -> Mat3 {
        let a = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        scale * (a * a.transpose() + 0.05 * Mat3::identity())
    }

    fn stats(mean: Vec3, covariance: Mat3) -> ColorStats {
        ColorStats {
            mean,
            covariance,
            pixel_count: 100,
        }
    }

    #[test]
    fn constant_region() {
        let px = vec![[0.2, 0.4, 0.6]; 10];
        let s = color_stats(&px, &[true; 10]).unwrap();
        assert_eq!(s.covariance, Mat3::zeros());
        assert!((s.mean - Vec3::new(0.2, 0.4, 0.6)).norm() < 1e-15);
    }

    #[test]
    fn black_white_half() {
        let px: Vec<_> = (0..20).map(|i| if i % 2 == 0 { [0.0; 3] } else { [1.0; 3] }).collect();
        let s = color_stats(&px, &[true; 20]).unwrap();
        assert_eq!(s.mean, Vec3::repeat(0.5));
        assert_eq!(s.covariance, Mat3::repeat(0.25));
    }

    #[test]
    fn stats_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let px: Vec<[f64; 3]> = (0..500).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let mask: Vec<bool> = (0..500).map(|_| rng.gen_bool(0.6)).collect();
        let s = color_stats(&px, &mask).unwrap();
        let sel: Vec<&[f64; 3]> = px.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| p).collect();
        let n = sel.len() as f64;
        for a in 0..3 {
            let ma: f64 = sel.iter().map(|p| p[a]).sum::<f64>() / n;
            assert!((s.mean[a] - ma).abs() < 1e-12);
            for b in 0..3 {
                let mb: f64 = sel.iter().map(|p| p[b]).sum::<f64>() / n;
                let c: f64 = sel.iter().map(|p| (p[a] - ma) * (p[b] - mb)).sum::<f64>() / n;
                assert!((s.covariance[(a, b)] - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unmasked_values_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut px: Vec<[f64; 3]> = (0..200).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let mask: Vec<bool> = (0..200).map(|i| i % 3 != 0).collect();
        let a = color_stats(&px, &mask).unwrap();
        for (p, m) in px.iter_mut().zip(&mask) {
            if !m {
                *p = [rng.gen(), rng.gen(), rng.gen()];
            }
        }
        assert_eq!(a, color_stats(&px, &mask).unwrap());
    }

    #[test]
    fn too_few_pixels() {
        assert!(color_stats(&[[0.0; 3]; 5], &[true, true, true, false, false]).is_err());
    }

    #[test]
    fn wct_fixed_point_and_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = stats(Vec3::new(0.3, 0.5, 0.2), random_spd(&mut rng, 0.01));
        let t = solve_wct(&s, &s);
        assert!((t.linear - Mat3::identity()).amax() < 1e-6);
        assert!(t.bias.amax() < 1e-6);

        let cov = random_spd(&mut rng, 0.01);
        let t = solve_wct(&stats(Vec3::repeat(0.2), cov), &stats(Vec3::repeat(0.7), cov));
        assert!((t.linear - Mat3::identity()).amax() < 1e-9);
        assert!((t.bias - Vec3::repeat(0.5)).amax() < 1e-9);
    }

    #[test]
    fn wct_moments_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = stats(Vec3::from_fn(|_, _| rng.gen()), random_spd(&mut rng, 0.02));
            let t = stats(Vec3::from_fn(|_, _| rng.gen()), random_spd(&mut rng, 0.02));
            let x = solve_wct(&s, &t);
            let mean = x.linear * s.mean + x.bias;
            let cov = x.linear * s.covariance * x.linear.transpose();
            assert!((mean - t.mean).amax() < 1e-10);
            assert!((cov - t.covariance).amax() < 1e-10);
        }
    }

    #[test]
    fn wct_degenerate_source_stays_finite() {
        let s = stats(Vec3::repeat(0.5), Mat3::zeros());
        let t = stats(Vec3::repeat(0.2), Mat3::identity() * 0.01);
        assert!(solve_wct(&s, &t).is_finite());
    }

    #[test]
    fn apply_respects_mask() {
        let tex = TextureImage::from_fn(4, 4, |x, y| [x as f64 / 4.0, y as f64 / 4.0, 0.5]);
        let t = ColorTransform {
            linear: Mat3::identity() * 2.0,
            bias: Vec3::new(-0.1, 0.0, 0.1),
        };
        assert_eq!(
            apply_color_transform(&tex, &Mask::new(4, 4, true), &ColorTransform::identity()).unwrap(),
            tex
        );
        assert_eq!(apply_color_transform(&tex, &Mask::new(4, 4, false), &t).unwrap(), tex);
        let mut mask = Mask::new(4, 4, false);
        mask.bits[5] = true;
        let out = apply_color_transform(&tex, &mask, &t).unwrap();
        let p = tex.pixels[5];
        let expect = [
            (2.0 * p[0] - 0.1).clamp(0.0, 1.0),
            (2.0 * p[1]).clamp(0.0, 1.0),
            (2.0 * p[2] + 0.1).clamp(0.0, 1.0),
        ];
        assert_eq!(out.pixels[5], expect);
        for k in (0..16).filter(|&k| k != 5) {
            assert_eq!(out.pixels[k], tex.pixels[k]);
        }
        assert!(apply_color_transform(&tex, &Mask::new(3, 4, true), &t).is_err());
    }

    #[test]
    fn transform_json_round_trip() {
        let t = ColorTransform {
            linear: Mat3::new(1.0, 0.1, 0.2, 0.3, 0.9, 0.0, -0.1, 0.0, 1.1),
            bias: Vec3::new(0.01, -0.02, 0.3),
        };
        assert_eq!(ColorTransform::from_json(&t.to_json()).unwrap(), t);
        assert_eq!(ColorTransform::from_params(&t.to_params()), t);
    }

    fn uv_mesh(uvs: Vec<[f64; 2]>, tris: &[[usize; 3]]) -> TexturedMesh {
        TexturedMesh {
            vertices: vec![Vec3::zeros(); uvs.len()],
            faces: tris.iter().map(|t| Face { v: *t, uv: Some(*t) }).collect(),
            uvs,
            texture: None,
        }
    }

    #[test]
    fn coverage_full_and_half() {
        let square = uv_mesh(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(uv_coverage_mask(&square, 32, 16).unwrap().count(), 32 * 16);
        let n = 64;
        let half = uv_mesh(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]);
        let c = uv_coverage_mask(&half, n, n).unwrap().count() as f64;
        let expect = 0.5 * (n * n) as f64;
        assert!((c - expect).abs() <= n as f64, "{c} vs {expect}");
    }

    #[test]
    fn coverage_needs_uvs() {
        let mut m = uv_mesh(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]);
        m.faces[0].uv = None;
        assert!(uv_coverage_mask(&m, 8, 8).is_err());
    }
}
