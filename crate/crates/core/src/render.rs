//! Deterministic software rasterizer: perspective projection, near-plane
//! clipping, z-buffer, perspective-correct UVs and bilinear texture lookup.
//! Shading is unlit albedo.

use rayon::prelude::*;

use crate::asset_io::{Mask, TextureImage, TexturedMesh};
use crate::error::{Error, Result};
use crate::Vec3;

/// Background color of every pixel not covered by the mesh.
pub const BACKGROUND: [f64; 3] = [0.5, 0.5, 0.5];
/// Albedo used when no texture is supplied.
pub const UNTEXTURED_ALBEDO: [f64; 3] = [0.7, 0.7, 0.7];
/// Field of view of [`camera_ring`] cameras, degrees.
pub const RING_FOV_DEG: f64 = 40.0;
/// Ring radius as a multiple of the bounding-box diagonal.
pub const RING_RADIUS_FACTOR: f64 = 1.8;

const BAND_ROWS: usize = 8;
/// Near plane as a fraction of the camera-to-target distance.
const NEAR_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(position: Vec3, target: Vec3, up: Vec3, fov_deg: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self {
            position,
            target,
            up,
            fov_deg,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.position, self.target, self.up]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(Error::invalid("camera vectors must be finite"));
        }
        if (self.target - self.position).norm() <= 0.0 {
            return Err(Error::invalid("camera position coincides with its target"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::invalid(format!("field of view {} outside (0, 180)", self.fov_deg)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image resolution must be positive"));
        }
        Ok(())
    }

    /// Right, up and forward unit vectors of the view frame.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (self.target - self.position).normalize();
        let mut right = forward.cross(&self.up);
        if right.norm() < 1e-12 {
            // up parallel to the view direction: pick any perpendicular
            let alt = if forward.x.abs() < 0.9 { Vec3::x() } else { Vec3::z() };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        (right, up, forward)
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.fov_deg.to_radians()).tan()
    }

    /// View-space coordinates: x right, y up, z depth along the view direction.
    pub fn to_view(&self, p: &Vec3) -> Vec3 {
        let (r, u, f) = self.basis();
        let d = p - self.position;
        Vec3::new(r.dot(&d), u.dot(&d), f.dot(&d))
    }

    /// Continuous pixel coordinates (pixel centers at integer + 0.5, row 0 on
    /// top) and depth of a world point, or `None` behind the near plane.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let v = self.to_view(p);
        (v.z >= self.near()).then(|| {
            let (x, y) = self.project_view(&v);
            (x, y, v.z)
        })
    }

    fn project_view(&self, v: &Vec3) -> (f64, f64) {
        let f = self.focal();
        (
            0.5 * self.width as f64 + f * v.x / v.z,
            0.5 * self.height as f64 - f * v.y / v.z,
        )
    }

    fn near(&self) -> f64 {
        NEAR_FRACTION * (self.target - self.position).norm()
    }
}

/// Cameras evenly spaced in azimuth on a circle of radius
/// `1.8 × bbox diagonal` at the given elevation, all looking at the bounding
/// box center with +y up. Azimuth 0 looks from +z.
pub fn camera_ring(mesh: &TexturedMesh, views: usize, elevation_deg: f64, resolution: usize) -> Result<Vec<Camera>> {
    let (lo, hi) = mesh
        .bounding_box()
        .ok_or_else(|| Error::invalid("cannot place cameras around an empty mesh"))?;
    camera_ring_around(lo, hi, views, elevation_deg, resolution)
}

/// [`camera_ring`] for an explicit bounding box.
pub fn camera_ring_around(lo: Vec3, hi: Vec3, views: usize, elevation_deg: f64, resolution: usize) -> Result<Vec<Camera>> {
    if views == 0 {
        return Err(Error::invalid("at least one view is required"));
    }
    let diag = (hi - lo).norm();
    if !(diag > 0.0) || !diag.is_finite() {
        return Err(Error::invalid("bounding box has zero extent"));
    }
    let center = 0.5 * (lo + hi);
    let radius = RING_RADIUS_FACTOR * diag;
    let el = elevation_deg.to_radians();
    (0..views)
        .map(|i| {
            let az = std::f64::consts::TAU * i as f64 / views as f64;
            let dir = Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
            Camera::new(center + radius * dir, center, Vec3::y(), RING_FOV_DEG, resolution, resolution)
        })
        .collect()
}

/// Output of one view. `depth` is view-space depth, `+∞` on background.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: TextureImage,
    pub mask: Mask,
    pub depth: Vec<f64>,
}

/// Four bilinear texel taps: linear texel index and weight.
pub type Taps = [(usize, f64); 4];

/// For each foreground pixel of a textured render, the texels and weights
/// whose combination produced its color.
#[derive(Debug, Clone, PartialEq)]
pub struct TexelTrace {
    pub width: usize,
    pub height: usize,
    pub taps: Vec<Option<Taps>>,
}

pub fn rasterize(mesh: &TexturedMesh, texture: Option<&TextureImage>, cam: &Camera) -> Result<RenderOutput> {
    Ok(rasterize_impl(mesh, texture, cam, false)?.0)
}

/// [`rasterize`] that also reports the texel taps behind every foreground
/// pixel, so the render is a known linear resampling of the texture.
pub fn rasterize_traced(mesh: &TexturedMesh, texture: &TextureImage, cam: &Camera) -> Result<(RenderOutput, TexelTrace)> {
    let (out, taps) = rasterize_impl(mesh, Some(texture), cam, true)?;
    Ok((
        out,
        TexelTrace {
            width: cam.width,
            height: cam.height,
            taps,
        },
    ))
}

/// One render per camera, in camera order.
pub fn render_all(mesh: &TexturedMesh, texture: Option<&TextureImage>, cams: &[Camera]) -> Result<Vec<RenderOutput>> {
    cams.iter().map(|c| rasterize(mesh, texture, c)).collect()
}

#[derive(Clone, Copy)]
struct ClipVertex {
    view: Vec3,
    uv: [f64; 2],
}

struct ScreenTriangle {
    xy: [(f64, f64); 3],
    inv_z: [f64; 3],
    uv: [[f64; 2]; 3],
    area: f64,
    x_range: (usize, usize),
    y_range: (usize, usize),
}

fn rasterize_impl(
    mesh: &TexturedMesh,
    texture: Option<&TextureImage>,
    cam: &Camera,
    trace: bool,
) -> Result<(RenderOutput, Vec<Option<Taps>>)> {
    cam.validate()?;
    if texture.is_some() && mesh.faces.iter().any(|f| f.uv.is_none()) {
        return Err(Error::invalid("mesh has faces without UVs but a texture was given"));
    }
    let (w, h) = (cam.width, cam.height);
    let (right, up, forward) = cam.basis();
    let to_view = |p: &Vec3| {
        let d = p - cam.position;
        Vec3::new(right.dot(&d), up.dot(&d), forward.dot(&d))
    };
    let near = cam.near();

    let triangles: Vec<ScreenTriangle> = mesh
        .faces
        .par_iter()
        .map(|f| {
            let verts: [ClipVertex; 3] = std::array::from_fn(|k| ClipVertex {
                view: to_view(&mesh.vertices[f.v[k]]),
                uv: f.uv.map_or([0.0; 2], |t| mesh.uvs[t[k]]),
            });
            let poly = clip_near(&verts, near);
            let projected: Vec<((f64, f64), f64, [f64; 2])> = poly
                .iter()
                .map(|c| (cam.project_view(&c.view), 1.0 / c.view.z, c.uv))
                .collect();
            (1..projected.len().saturating_sub(1))
                .filter_map(|i| screen_triangle([projected[0], projected[i], projected[i + 1]], w, h))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();

    let bands: Vec<Band> = (0..h.div_ceil(BAND_ROWS))
        .into_par_iter()
        .map(|b| {
            let y0 = b * BAND_ROWS;
            let y1 = (y0 + BAND_ROWS).min(h);
            raster_band(&triangles, texture, w, y0, y1, trace)
        })
        .collect();

    let mut rgb = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    let mut taps = Vec::with_capacity(if trace { w * h } else { 0 });
    for band in bands {
        rgb.extend(band.rgb);
        mask.extend(band.mask);
        depth.extend(band.depth);
        taps.extend(band.taps);
    }
    Ok((
        RenderOutput {
            rgb: TextureImage {
                width: w,
                height: h,
                pixels: rgb,
            },
            mask: Mask {
                width: w,
                height: h,
                bits: mask,
            },
            depth,
        },
        taps,
    ))
}

/// Sutherland–Hodgman against `z >= near`, interpolating linearly in view space.
fn clip_near(tri: &[ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.view.z >= near;
        let b_in = b.view.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.view.z) / (b.view.z - a.view.z);
            let mut view = a.view + (b.view - a.view) * t;
            view.z = near;
            out.push(ClipVertex {
                view,
                uv: [a.uv[0] + (b.uv[0] - a.uv[0]) * t, a.uv[1] + (b.uv[1] - a.uv[1]) * t],
            });
        }
    }
    out
}

fn screen_triangle(v: [((f64, f64), f64, [f64; 2]); 3], w: usize, h: usize) -> Option<ScreenTriangle> {
    let xy = [v[0].0, v[1].0, v[2].0];
    let area = edge(xy[0], xy[1], xy[2]);
    if area == 0.0 || !area.is_finite() {
        return None;
    }
    let min_x = xy.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = xy.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = xy.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = xy.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    // pixel i covers centers at i + 0.5
    let x_lo = (min_x - 0.5).ceil().max(0.0);
    let x_hi = (max_x - 0.5).floor().min(w as f64 - 1.0);
    let y_lo = (min_y - 0.5).ceil().max(0.0);
    let y_hi = (max_y - 0.5).floor().min(h as f64 - 1.0);
    if x_lo > x_hi || y_lo > y_hi {
        return None;
    }
    Some(ScreenTriangle {
        xy,
        inv_z: [v[0].1, v[1].1, v[2].1],
        uv: [v[0].2, v[1].2, v[2].2],
        area,
        x_range: (x_lo as usize, x_hi as usize),
        y_range: (y_lo as usize, y_hi as usize),
    })
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

struct Band {
    rgb: Vec<[f64; 3]>,
    mask: Vec<bool>,
    depth: Vec<f64>,
    taps: Vec<Option<Taps>>,
}

fn raster_band(
    triangles: &[ScreenTriangle],
    texture: Option<&TextureImage>,
    w: usize,
    y0: usize,
    y1: usize,
    trace: bool,
) -> Band {
    let n = w * (y1 - y0);
    let mut depth = vec![f64::INFINITY; n];
    let mut uv = vec![[0.0; 2]; n];
    for t in triangles {
        if t.y_range.1 < y0 || t.y_range.0 >= y1 {
            continue;
        }
        for y in t.y_range.0.max(y0)..=t.y_range.1.min(y1 - 1) {
            let py = y as f64 + 0.5;
            for x in t.x_range.0..=t.x_range.1 {
                let p = (x as f64 + 0.5, py);
                let b0 = edge(t.xy[1], t.xy[2], p) / t.area;
                let b1 = edge(t.xy[2], t.xy[0], p) / t.area;
                let b2 = edge(t.xy[0], t.xy[1], p) / t.area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let w0 = b0 * t.inv_z[0];
                let w1 = b1 * t.inv_z[1];
                let w2 = b2 * t.inv_z[2];
                let s = w0 + w1 + w2;
                let z = 1.0 / s;
                let k = (y - y0) * w + x;
                if z < depth[k] {
                    depth[k] = z;
                    uv[k] = [
                        (w0 * t.uv[0][0] + w1 * t.uv[1][0] + w2 * t.uv[2][0]) / s,
                        (w0 * t.uv[0][1] + w1 * t.uv[1][1] + w2 * t.uv[2][1]) / s,
                    ];
                }
            }
        }
    }
    let mask: Vec<bool> = depth.iter().map(|d| d.is_finite()).collect();
    let mut taps = if trace { vec![None; n] } else { Vec::new() };
    let rgb = (0..n)
        .map(|k| {
            if !mask[k] {
                return BACKGROUND;
            }
            match texture {
                None => UNTEXTURED_ALBEDO,
                Some(tex) => {
                    let tp = tex.bilinear_taps(uv[k][0], uv[k][1]);
                    if trace {
                        taps[k] = Some(tp);
                    }
                    let mut c = [0.0; 3];
                    for (i, wt) in tp {
                        let texel = tex.pixels[i];
                        for ch in 0..3 {
                            c[ch] += wt * texel[ch];
                        }
                    }
                    c
                }
            }
        })
        .collect();
    Band { rgb, mask, depth, taps }
}
