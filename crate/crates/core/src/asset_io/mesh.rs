//! Triangle meshes and the Wavefront-style ASCII reader/writer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::Vec3;

/// One triangle: three vertex indices and, when the mesh is UV-mapped, three
/// texture-coordinate indices (one per corner).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub v: [usize; 3],
    pub uv: Option<[usize; 3]>,
}

/// Triangle mesh with optional per-corner UVs and an optional diffuse texture
/// reference.
///
/// Meshes may be non-manifold, open, or made of several disconnected
/// components. After [`TexturedMesh::cleanup`] every face has positive area.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TexturedMesh {
    pub vertices: Vec<Vec3>,
    pub uvs: Vec<[f64; 2]>,
    pub faces: Vec<Face>,
    /// Path of the diffuse texture image, if the mesh references one.
    pub texture: Option<PathBuf>,
}

impl TexturedMesh {
    pub fn face_positions(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f].v;
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.face_positions(f);
        triangle_area(&a, &b, &c)
    }

    /// True when every face carries UV indices.
    pub fn has_uvs(&self) -> bool {
        !self.faces.is_empty() && self.faces.iter().all(|f| f.uv.is_some())
    }

    /// Axis-aligned bounding box over all vertices, `None` for an empty mesh.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        bounding_box(&self.vertices)
    }

    /// Drops faces with repeated indices or zero area. Returns the number of
    /// faces removed.
    pub fn cleanup(&mut self) -> usize {
        let before = self.faces.len();
        let vertices = &self.vertices;
        self.faces.retain(|f| {
            let [a, b, c] = f.v;
            !is_degenerate(&vertices[a], &vertices[b], &vertices[c]) && a != b && b != c && a != c
        });
        before - self.faces.len()
    }

    /// Checks index ranges; used after construction from untrusted data.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        let nt = self.uvs.len();
        for (i, f) in self.faces.iter().enumerate() {
            if f.v.iter().any(|&v| v >= nv) {
                return Err(Error::invalid(format!("face {i} references a missing vertex")));
            }
            if let Some(uv) = f.uv {
                if uv.iter().any(|&t| t >= nt) {
                    return Err(Error::invalid(format!("face {i} references a missing uv")));
                }
            }
        }
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("non-finite vertex position"));
        }
        Ok(())
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn is_degenerate(a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let twice_area = (b - a).cross(&(c - a)).norm();
    let longest = (b - a)
        .norm_squared()
        .max((c - b).norm_squared())
        .max((a - c).norm_squared());
    !(twice_area > 1e-12 * longest) || !twice_area.is_finite()
}

pub fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

/// Reads a Wavefront-style mesh. Polygons are fan-triangulated and degenerate
/// triangles dropped (a warning reports how many).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TexturedMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut mesh, dropped) = parse_obj(&text, path)?;
    if dropped > 0 {
        warn!("{}: dropped {dropped} degenerate faces", path.display());
    }
    if let Some(mtl) = mesh.texture.take() {
        mesh.texture = resolve_material_texture(path, &mtl);
    }
    Ok(mesh)
}

/// Parses OBJ text. `origin` is only used in error messages. Returns the
/// cleaned mesh and the number of degenerate faces removed. The `texture`
/// field holds the raw `mtllib` argument, if any.
pub fn parse_obj(text: &str, origin: &Path) -> Result<(TexturedMesh, usize)> {
    let mut mesh = TexturedMesh::default();
    let fmt_err = |line: usize, message: String| Error::Format {
        path: origin.to_path_buf(),
        line,
        message,
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let c = parse_floats(&mut tokens, 3).map_err(|m| fmt_err(lineno, m))?;
                mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            "vt" => {
                let c = parse_floats(&mut tokens, 2).map_err(|m| fmt_err(lineno, m))?;
                mesh.uvs.push([c[0], c[1]]);
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in tokens {
                    corners.push(
                        parse_corner(tok, mesh.vertices.len(), mesh.uvs.len())
                            .map_err(|m| fmt_err(lineno, m))?,
                    );
                }
                if corners.len() < 3 {
                    return Err(fmt_err(lineno, "face needs at least 3 corners".into()));
                }
                let with_uv = corners.iter().filter(|c| c.1.is_some()).count();
                if with_uv != 0 && with_uv != corners.len() {
                    return Err(fmt_err(lineno, "face mixes corners with and without uvs".into()));
                }
                for k in 1..corners.len() - 1 {
                    let (a, b, c) = (corners[0], corners[k], corners[k + 1]);
                    let uv = match (a.1, b.1, c.1) {
                        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                        _ => None,
                    };
                    mesh.faces.push(Face {
                        v: [a.0, b.0, c.0],
                        uv,
                    });
                }
            }
            "mtllib" => {
                let rest = line["mtllib".len()..].trim();
                if !rest.is_empty() {
                    mesh.texture = Some(PathBuf::from(rest));
                }
            }
            // normals, groups, smoothing, materials: not used
            _ => {}
        }
    }

    mesh.validate()?;
    let dropped = mesh.cleanup();
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh(origin.to_path_buf()));
    }
    Ok((mesh, dropped))
}

fn parse_floats<'a>(tokens: &mut impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let tok = tokens.next().ok_or_else(|| format!("expected {n} coordinates"))?;
        let x: f64 = tok.parse().map_err(|_| format!("bad number '{tok}'"))?;
        if !x.is_finite() {
            return Err(format!("non-finite number '{tok}'"));
        }
        out.push(x);
    }
    Ok(out)
}

fn parse_index(tok: &str, count: usize) -> Result<usize, String> {
    let i: i64 = tok.parse().map_err(|_| format!("bad index '{tok}'"))?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        return Err("index 0 is not valid (indices are 1-based)".into());
    };
    if resolved < 0 || resolved as usize >= count {
        return Err(format!("index {i} out of range ({count} defined)"));
    }
    Ok(resolved as usize)
}

fn parse_corner(tok: &str, nv: usize, nt: usize) -> Result<(usize, Option<usize>), String> {
    let mut parts = tok.split('/');
    let v = parse_index(parts.next().unwrap_or(""), nv)?;
    let t = match parts.next() {
        Some(s) if !s.is_empty() => Some(parse_index(s, nt)?),
        _ => None,
    };
    Ok((v, t))
}

/// Looks up `map_Kd` in the material library next to the mesh file.
fn resolve_material_texture(obj_path: &Path, mtllib: &Path) -> Option<PathBuf> {
    let dir = obj_path.parent().unwrap_or(Path::new(""));
    let mtl_path = dir.join(mtllib);
    let text = match fs::read_to_string(&mtl_path) {
        Ok(t) => t,
        Err(e) => {
            warn!("{}: cannot read material library: {e}", mtl_path.display());
            return None;
        }
    };
    text.lines().find_map(|l| {
        let l = l.trim();
        l.strip_prefix("map_Kd")
            .map(|rest| rest.trim())
            .filter(|rest| !rest.is_empty())
            .map(|rest| dir.join(rest))
    })
}

/// Writes the mesh as OBJ. Coordinates use the shortest decimal form that
/// reads back to the same `f64`, so a save/load round trip is exact. When the
/// mesh references a texture, a sibling `.mtl` file pointing at it is written
/// as well.
pub fn save_mesh(mesh: &TexturedMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("# meshstyle\n");

    if let Some(tex) = &mesh.texture {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
        let mtl_name = format!("{stem}.mtl");
        let dir = path.parent().unwrap_or(Path::new(""));
        let tex_ref = tex.strip_prefix(dir).unwrap_or(tex);
        let mtl = format!("newmtl material0\nmap_Kd {}\n", tex_ref.display());
        let mtl_path = dir.join(&mtl_name);
        fs::write(&mtl_path, mtl).map_err(|e| Error::io(&mtl_path, e))?;
        let _ = writeln!(out, "mtllib {mtl_name}\nusemtl material0");
    }

    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in &mesh.uvs {
        let _ = writeln!(out, "vt {:?} {:?}", t[0], t[1]);
    }
    for f in &mesh.faces {
        match f.uv {
            Some(uv) => {
                let _ = writeln!(
                    out,
                    "f {}/{} {}/{} {}/{}",
                    f.v[0] + 1,
                    uv[0] + 1,
                    f.v[1] + 1,
                    uv[1] + 1,
                    f.v[2] + 1,
                    uv[2] + 1
                );
            }
            None => {
                let _ = writeln!(out, "f {} {} {}", f.v[0] + 1, f.v[1] + 1, f.v[2] + 1);
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5
f 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8
";

    fn parse(s: &str) -> Result<(TexturedMesh, usize)> {
        parse_obj(s, Path::new("test.obj"))
    }

    #[test]
    fn cube_loads() {
        let (m, dropped) = parse(CUBE).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 12);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let quads = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\n\
                     f 1 2 3 4\nf 1 2 6 5\n";
        let (m, _) = parse(quads).unwrap();
        assert_eq!(m.faces.len(), 4);
        assert_eq!(m.faces[0].v, [0, 1, 2]);
        assert_eq!(m.faces[1].v, [0, 2, 3]);
    }

    #[test]
    fn zero_area_faces_are_dropped() {
        // 97 good triangles in a strip plus 3 collinear ones.
        let mut s = String::new();
        for i in 0..=100 {
            s += &format!("v {i} 0 0\nv {i} 1 0\n");
        }
        let mut good = 0;
        for i in 0..97 {
            let (a, b, c) = (2 * i + 1, 2 * i + 2, 2 * i + 3);
            s += &format!("f {a} {b} {c}\n");
            good += 1;
        }
        // collinear along the x axis, a repeated index, and a sliver of exact zero area
        s += "f 1 3 5\nf 2 2 4\nf 7 9 11\n";
        let (m, dropped) = parse(&s).unwrap();
        // brute-force survivor count
        let survivors = m.faces.iter().filter(|f| {
            let [a, b, c] = f.v;
            triangle_area(&m.vertices[a], &m.vertices[b], &m.vertices[c]) > 0.0
        });
        assert_eq!(survivors.count(), good);
        assert_eq!(m.faces.len(), 97);
        assert_eq!(dropped, 3);
    }

    #[test]
    fn cleanup_is_idempotent() {
        let (mut m, _) = parse(CUBE).unwrap();
        assert_eq!(m.cleanup(), 0);
        assert_eq!(m.cleanup(), 0);
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse("v 0 0 0\nv 1 0 0\nv 0 1 zz\nf 1 2 3\n").unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("v 0 0 0\nv 1 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }));
    }

    #[test]
    fn only_degenerate_faces_is_empty_mesh() {
        let err = parse("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::EmptyMesh(_)));
    }

    #[test]
    fn corner_forms() {
        let s = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 1\nf 1/1/1 2/2/1 -1/-1/1\n";
        let (m, _) = parse(s).unwrap();
        assert_eq!(m.faces[0].uv, Some([0, 1, 2]));
        assert!(m.has_uvs());
        let s = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1//1 2//1 3//1\n";
        let (m, _) = parse(s).unwrap();
        assert_eq!(m.faces[0].uv, None);
    }

    #[test]
    fn mixed_uv_corners_rejected() {
        let s = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2 3\n";
        assert!(matches!(parse(s), Err(Error::Format { line: 5, .. })));
    }
}
