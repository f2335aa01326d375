//! Procedural part-labeled, UV-mapped, textured meshes.
//!
//! The quadruped is built from up to eleven overlapping ellipsoidal
//! components (body, head, legs, tail, neck, ears, snout), mirror-symmetric
//! about `x = 0`, with each component owning one cell of a texture atlas on
//! a black background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::{Path, PathBuf};

use crate::asset_io::{save_mesh, save_part_labels, save_texture, Face, PartLabeling, TextureImage, TexturedMesh};
use crate::error::Result;
use crate::{Mat3, Vec3};

/// Mesh, labels and texture generated together.
#[derive(Debug, Clone)]
pub struct SynthAsset {
    pub mesh: TexturedMesh,
    pub labels: PartLabeling,
    pub texture: TextureImage,
}

pub const QUADRUPED_PARTS: [&str; 11] = [
    "body",
    "head",
    "front_left_leg",
    "front_right_leg",
    "back_left_leg",
    "back_right_leg",
    "tail",
    "neck",
    "left_ear",
    "right_ear",
    "snout",
];

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupedParams {
    /// Number of part labels, 1 to 11. Components beyond the first
    /// `parts - 1` share the last label.
    pub parts: usize,
    pub body_semi_axes: Vec3,
    pub head_radius: f64,
    pub leg_length: f64,
    pub leg_radius: f64,
    pub leg_splay: f64,
    pub tail_length: f64,
    pub tail_angle: f64,
    pub neck_length: f64,
    pub ear_size: f64,
    pub snout_length: f64,
    /// Two stripe colors of the texture.
    pub palette: [[f64; 3]; 2],
    pub stripe_frequency: f64,
    /// Tessellation of each component (latitude bands, longitude segments).
    pub stacks: usize,
    pub slices: usize,
    pub texture_size: usize,
}

impl Default for QuadrupedParams {
    fn default() -> Self {
        Self {
            parts: 11,
            body_semi_axes: Vec3::new(0.35, 0.3, 0.7),
            head_radius: 0.22,
            leg_length: 0.55,
            leg_radius: 0.08,
            leg_splay: 0.0,
            tail_length: 0.35,
            tail_angle: 0.6,
            neck_length: 0.25,
            ear_size: 0.08,
            snout_length: 0.12,
            palette: [[0.8, 0.55, 0.25], [0.35, 0.2, 0.1]],
            stripe_frequency: 4.0,
            stacks: 8,
            slices: 14,
            texture_size: 128,
        }
    }
}

impl QuadrupedParams {
    /// Proportions and colors drawn from a seeded generator.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let base = Self::default();
        let body = Vec3::new(
            base.body_semi_axes.x * s(0.75, 1.3),
            base.body_semi_axes.y * s(0.75, 1.3),
            base.body_semi_axes.z * s(0.75, 1.3),
        );
        Self {
            body_semi_axes: body,
            head_radius: base.head_radius * s(0.7, 1.4),
            leg_length: base.leg_length * s(0.6, 1.5),
            leg_radius: base.leg_radius * s(0.7, 1.5),
            leg_splay: s(-0.25, 0.25),
            tail_length: base.tail_length * s(0.5, 1.8),
            tail_angle: s(0.1, 1.2),
            neck_length: base.neck_length * s(0.6, 1.8),
            ear_size: base.ear_size * s(0.6, 1.6),
            snout_length: base.snout_length * s(0.5, 1.8),
            palette: [[s(0.0, 1.0), s(0.0, 1.0), s(0.0, 1.0)], [s(0.0, 1.0), s(0.0, 1.0), s(0.0, 1.0)]],
            stripe_frequency: s(2.0, 7.0),
            ..base
        }
    }

    pub fn with_parts(mut self, parts: usize) -> Self {
        self.parts = parts;
        self
    }
}

struct Component {
    center: Vec3,
    rotation: Mat3,
    semi_axes: Vec3,
}

fn rot_x(a: f64) -> Mat3 {
    *nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), a).matrix()
}

fn rot_z(a: f64) -> Mat3 {
    *nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), a).matrix()
}

fn quadruped_components(p: &QuadrupedParams) -> Vec<Component> {
    let b = p.body_semi_axes;
    let leg_top = -0.6 * b.y;
    let leg_center_y = leg_top - 0.5 * p.leg_length;
    let leg = |x: f64, z: f64, splay: f64| Component {
        center: Vec3::new(x + splay * 0.5 * p.leg_length * x.signum(), leg_center_y, z),
        rotation: rot_z(-splay * x.signum()),
        semi_axes: Vec3::new(p.leg_radius, 0.5 * p.leg_length + p.leg_radius, p.leg_radius),
    };
    let lx = 0.6 * b.x;
    let fz = 0.65 * b.z;
    let neck_base = Vec3::new(0.0, 0.5 * b.y, 0.8 * b.z);
    let neck_dir = Vec3::new(0.0, 0.7, 0.7).normalize();
    let head_center = neck_base + neck_dir * (p.neck_length + 0.6 * p.head_radius);
    let tail_dir = Vec3::new(0.0, p.tail_angle.sin(), -p.tail_angle.cos());
    let tail_base = Vec3::new(0.0, 0.3 * b.y, -0.95 * b.z);
    let ear = |side: f64| Component {
        center: head_center + Vec3::new(side * 0.6 * p.head_radius, 0.85 * p.head_radius, -0.1 * p.head_radius),
        rotation: rot_z(-side * 0.4),
        semi_axes: Vec3::new(0.5 * p.ear_size, p.ear_size, 0.25 * p.ear_size),
    };

    vec![
        Component {
            center: Vec3::zeros(),
            rotation: Mat3::identity(),
            semi_axes: b,
        },
        Component {
            center: head_center,
            rotation: Mat3::identity(),
            semi_axes: Vec3::new(p.head_radius, 0.9 * p.head_radius, 1.1 * p.head_radius),
        },
        leg(lx, fz, p.leg_splay),
        leg(-lx, fz, p.leg_splay),
        leg(lx, -fz, p.leg_splay),
        leg(-lx, -fz, p.leg_splay),
        Component {
            center: tail_base + tail_dir * (0.5 * p.tail_length),
            // local y axis along the tail direction
            rotation: rot_x(-(std::f64::consts::FRAC_PI_2 - p.tail_angle)),
            semi_axes: Vec3::new(0.05, 0.5 * p.tail_length + 0.03, 0.05),
        },
        Component {
            center: neck_base + neck_dir * (0.5 * p.neck_length),
            rotation: rot_x(std::f64::consts::FRAC_PI_4),
            semi_axes: Vec3::new(0.12, 0.5 * p.neck_length + 0.08, 0.12),
        },
        ear(1.0),
        ear(-1.0),
        Component {
            center: head_center + Vec3::new(0.0, -0.2 * p.head_radius, p.head_radius + 0.4 * p.snout_length),
            rotation: Mat3::identity(),
            semi_axes: Vec3::new(0.45 * p.head_radius, 0.35 * p.head_radius, 0.5 * p.snout_length + 0.02),
        },
    ]
}

/// Procedural quadruped with labels and an atlas texture.
pub fn quadruped(p: &QuadrupedParams) -> SynthAsset {
    assert!((1..=11).contains(&p.parts), "quadruped supports 1 to 11 parts");
    let comps = quadruped_components(p);
    let mut mesh = TexturedMesh::default();
    let mut face_part = Vec::new();
    let cols = 4;
    let rows = 3;
    for (c, comp) in comps.iter().enumerate() {
        let cell = atlas_cell(c, cols, rows);
        let before = mesh.faces.len();
        append_ellipsoid(&mut mesh, comp.center, comp.rotation, comp.semi_axes, p.stacks, p.slices, cell);
        let label = c.min(p.parts - 1);
        face_part.extend(std::iter::repeat_n(label, mesh.faces.len() - before));
    }
    let mut part_names: Vec<String> = QUADRUPED_PARTS[..p.parts].iter().map(|s| s.to_string()).collect();
    if p.parts < 11 {
        part_names[p.parts - 1] = if p.parts == 1 { "all".into() } else { "other".into() };
    }
    let removed = mesh.cleanup();
    debug_assert_eq!(removed, 0, "generator produced degenerate faces");
    let texture = atlas_texture(p, comps.len(), cols, rows);
    SynthAsset {
        mesh,
        labels: PartLabeling { part_names, face_part },
        texture,
    }
}

/// `[u0, v0, u1, v1]` of atlas cell `i` with a small margin.
fn atlas_cell(i: usize, cols: usize, rows: usize) -> [f64; 4] {
    let (cx, cy) = (i % cols, i / cols);
    let (w, h) = (1.0 / cols as f64, 1.0 / rows as f64);
    let m = 0.08;
    [
        (cx as f64 + m) * w,
        1.0 - (cy as f64 + 1.0 - m) * h,
        (cx as f64 + 1.0 - m) * w,
        1.0 - (cy as f64 + m) * h,
    ]
}

fn atlas_texture(p: &QuadrupedParams, comps: usize, cols: usize, rows: usize) -> TextureImage {
    let n = p.texture_size;
    let cells: Vec<[f64; 4]> = (0..comps).map(|c| atlas_cell(c, cols, rows)).collect();
    TextureImage::from_fn(n, n, |x, y| {
        let u = (x as f64 + 0.5) / n as f64;
        let v = 1.0 - (y as f64 + 0.5) / n as f64;
        for (c, r) in cells.iter().enumerate() {
            // small bleed around each cell so bilinear lookups at the border stay inside
            let pad = 1.5 / n as f64;
            if u >= r[0] - pad && u <= r[2] + pad && v >= r[1] - pad && v <= r[3] + pad {
                let phase = c as f64 * 0.7;
                let s = 0.5 + 0.5 * (std::f64::consts::TAU * p.stripe_frequency * (u + 0.6 * v) + phase).sin();
                let shade = 0.85 + 0.15 * ((c * 37 % 11) as f64 / 10.0);
                let mut out = [0.0; 3];
                for k in 0..3 {
                    let col = p.palette[0][k] * (1.0 - s) + p.palette[1][k] * s;
                    // slow per-channel mottling so the colors span all three dimensions
                    let mottle = 0.08 * (std::f64::consts::TAU * (1.7 * u + (2.3 + k as f64) * v) + 1.9 * k as f64).sin();
                    out[k] = (col * shade + mottle).clamp(0.0, 1.0);
                }
                return out;
            }
        }
        [0.0, 0.0, 0.0]
    })
}

/// Paths of an asset written by [`SynthAsset::write`].
#[derive(Debug, Clone)]
pub struct AssetFiles {
    pub mesh: PathBuf,
    pub labels: PathBuf,
    pub texture: PathBuf,
}

impl SynthAsset {
    /// Writes `<stem>.obj`, `<stem>.mtl`, `<stem>.png` and
    /// `<stem>_labels.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<AssetFiles> {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        let files = AssetFiles {
            mesh: dir.join(format!("{stem}.obj")),
            labels: dir.join(format!("{stem}_labels.json")),
            texture: dir.join(format!("{stem}.png")),
        };
        save_texture(&self.texture, &files.texture)?;
        let mesh = TexturedMesh {
            texture: Some(files.texture.clone()),
            ..self.mesh.clone()
        };
        save_mesh(&mesh, &files.mesh)?;
        save_part_labels(&self.labels, &files.labels)?;
        Ok(files)
    }
}

/// Appends a latitude/longitude tessellated ellipsoid. `uv_rect` is
/// `[u0, v0, u1, v1]`; longitude maps to u and latitude to v.
pub fn append_ellipsoid(
    mesh: &mut TexturedMesh,
    center: Vec3,
    rotation: Mat3,
    semi_axes: Vec3,
    stacks: usize,
    slices: usize,
    uv_rect: [f64; 4],
) {
    assert!(stacks >= 2 && slices >= 3);
    let v_base = mesh.vertices.len();
    let t_base = mesh.uvs.len();
    let map = |theta: f64, phi: f64| {
        // polar axis is local y
        let local = Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
        center + rotation * local.component_mul(&semi_axes)
    };
    // vertex layout: top pole, (stacks - 1) rings of `slices`, bottom pole
    mesh.vertices.push(map(0.0, 0.0));
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = std::f64::consts::TAU * j as f64 / slices as f64;
            mesh.vertices.push(map(theta, phi));
        }
    }
    mesh.vertices.push(map(std::f64::consts::PI, 0.0));
    let bottom = mesh.vertices.len() - 1;

    // uv grid of (stacks + 1) x (slices + 1), row 0 at the top pole
    let [u0, v0, u1, v1] = uv_rect;
    for i in 0..=stacks {
        for j in 0..=slices {
            let u = u0 + (u1 - u0) * j as f64 / slices as f64;
            let v = v1 - (v1 - v0) * i as f64 / stacks as f64;
            mesh.uvs.push([u, v]);
        }
    }
    let uv = |i: usize, j: usize| t_base + i * (slices + 1) + j;
    let ring = |i: usize, j: usize| v_base + 1 + (i - 1) * slices + (j % slices);

    for j in 0..slices {
        mesh.faces.push(Face {
            v: [v_base, ring(1, j + 1), ring(1, j)],
            uv: Some([uv(0, j), uv(1, j + 1), uv(1, j)]),
        });
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            mesh.faces.push(Face {
                v: [ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)],
                uv: Some([uv(i, j), uv(i, j + 1), uv(i + 1, j + 1)]),
            });
            mesh.faces.push(Face {
                v: [ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)],
                uv: Some([uv(i, j), uv(i + 1, j + 1), uv(i + 1, j)]),
            });
        }
    }
    for j in 0..slices {
        mesh.faces.push(Face {
            v: [ring(stacks - 1, j), ring(stacks - 1, j + 1), bottom],
            uv: Some([uv(stacks - 1, j), uv(stacks - 1, j + 1), uv(stacks, j)]),
        });
    }
}

/// UV-mapped sphere mesh covering the whole unit UV square.
pub fn uv_sphere(center: Vec3, radius: f64, stacks: usize, slices: usize) -> TexturedMesh {
    let mut mesh = TexturedMesh::default();
    append_ellipsoid(
        &mut mesh,
        center,
        Mat3::identity(),
        Vec3::repeat(radius),
        stacks,
        slices,
        [0.0, 0.0, 1.0, 1.0],
    );
    mesh
}

/// Axis-aligned unit cube `[0,1]^3`, 8 vertices and 12 triangles, no UVs.
pub fn unit_cube() -> TexturedMesh {
    let vertices = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let faces = quads
        .iter()
        .flat_map(|q| {
            [
                Face { v: [q[0], q[1], q[2]], uv: None },
                Face { v: [q[0], q[2], q[3]], uv: None },
            ]
        })
        .collect();
    TexturedMesh {
        vertices,
        uvs: Vec::new(),
        faces,
        texture: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{sample_surface, symmetry_distance, SymmetryPlane};

    #[test]
    fn quadruped_is_well_formed() {
        for parts in [1, 3, 7, 11] {
            let a = quadruped(&QuadrupedParams::default().with_parts(parts));
            a.mesh.validate().unwrap();
            a.labels.check(&a.mesh).unwrap();
            assert_eq!(a.labels.part_count(), parts);
            assert!(a.mesh.has_uvs());
            for p in 0..parts {
                assert!(a.labels.face_part.contains(&p));
            }
        }
    }

    #[test]
    fn quadruped_mirror_symmetric() {
        let a = quadruped(&QuadrupedParams::random(9));
        let plane = SymmetryPlane::parse("x=0").unwrap().unwrap();
        let d = symmetry_distance(&a.mesh.vertices, &plane).unwrap();
        assert!(d < 1e-12, "{d}");
        let s = sample_surface(&a.mesh, &a.labels, 100, 0).unwrap();
        assert_eq!(s.len(), 100);
    }

    #[test]
    fn cube_counts() {
        let c = unit_cube();
        assert_eq!(c.vertices.len(), 8);
        assert_eq!(c.faces.len(), 12);
        let area: f64 = (0..12).map(|f| c.face_area(f)).sum();
        assert!((area - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_is_closed_and_mapped() {
        let s = uv_sphere(Vec3::zeros(), 1.0, 16, 24);
        assert!(s.has_uvs());
        for v in &s.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.faces.len(), 2 * 24 * (16 - 1));
    }
}
