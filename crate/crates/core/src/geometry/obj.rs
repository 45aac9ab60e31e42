//! Minimal Wavefront OBJ support: `v x y z` and `f i j k ...` records.

use std::fmt::Write as _;
use std::path::Path;

use super::TriangleMesh;
use crate::error::{ChainError, Result};
use crate::skeleton::Vec3;

/// Parses vertices and faces; polygons are fan-triangulated and indices may
/// be negative (relative) or carry `/vt/vn` suffixes. `origin` names the
/// source in error messages.
pub fn parse_obj(text: &str, origin: &str) -> Result<TriangleMesh> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let err = |msg: String| ChainError::Parse { path: origin.to_string(), line: ln + 1, msg };
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate {:?}: {}", s, e))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                verts.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| err(format!("bad face index {:?}", s)))?;
                        let n = verts.len() as i64;
                        let k = if i > 0 { i - 1 } else { n + i };
                        if i == 0 || k < 0 || k >= n {
                            return Err(err(format!("face index {} out of range ({} vertices so far)", i, n)));
                        }
                        Ok(k as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(verts, faces)
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text, &path.display().to_string())
}

pub fn to_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}
