//! Closed primitive meshes with outward-facing winding.

use std::collections::HashMap;

use super::TriangleMesh;
use crate::skeleton::Vec3;

pub fn cuboid(half: Vec3) -> TriangleMesh {
    let vertices: Vec<Vec3> = (0..8)
        .map(|i| {
            let s = |bit: usize, h: f64| if i & bit != 0 { h } else { -h };
            Vec3::new(s(1, half.x), s(2, half.y), s(4, half.z))
        })
        .collect();
    let quads = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];
    let tris = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriangleMesh::new(vertices, tris).expect("cuboid with positive extents")
}

pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.extend([[f[0], ab, ca], [f[1], bc, ab], [f[2], ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(verts, faces).expect("icosphere with positive radius")
}

/// Y-aligned cylinder centered at the origin.
pub fn cylinder(radius: f64, half_height: f64, segments: usize) -> TriangleMesh {
    let n = segments.max(3);
    let mut verts = Vec::with_capacity(2 * n + 2);
    for y in [-half_height, half_height] {
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            verts.push(Vec3::new(radius * a.cos(), y, radius * a.sin()));
        }
    }
    let (bottom, top) = (2 * n, 2 * n + 1);
    verts.push(Vec3::new(0.0, -half_height, 0.0));
    verts.push(Vec3::new(0.0, half_height, 0.0));
    let mut faces = Vec::with_capacity(4 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        let (b0, b1, t0, t1) = (i, j, n + i, n + j);
        faces.push([b0, t1, b1]);
        faces.push([b0, t0, t1]);
        faces.push([bottom, b0, b1]);
        faces.push([top, t1, t0]);
    }
    TriangleMesh::new(verts, faces).expect("cylinder with positive extents")
}
