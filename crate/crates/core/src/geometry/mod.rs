//! Triangle meshes, exact distance queries and inside tests.

pub mod bvh;
pub mod distance;
pub mod inside;
pub mod obj;
pub mod primitives;
pub mod proxy;

use std::collections::HashMap;

use crate::error::{ChainError, Result};
use crate::repr::ObjectPose;
use crate::skeleton::Vec3;

pub use bvh::{Aabb, Bvh, Nearest};
pub use distance::{point_triangle_closest, point_triangle_sqdist};
pub use proxy::body_proxy_points;

const MIN_AREA: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    corners: Vec<[Vec3; 3]>,
    watertight: bool,
    bvh: Bvh,
}

impl TriangleMesh {
    /// Builds a mesh, dropping faces with area ≤ 1e-12 m² (with a warning).
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<TriangleMesh> {
        if triangles.is_empty() {
            return Err(ChainError::EmptyMesh);
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(ChainError::InvalidSequence(format!(
                "face {:?} indexes past {} vertices",
                t,
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(ChainError::InvalidSequence("non-finite mesh vertex".into()));
        }
        let before = triangles.len();
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
                0.5 * (b - a).cross(&(c - a)).norm() > MIN_AREA
            })
            .collect();
        if triangles.is_empty() {
            return Err(ChainError::DegenerateMesh);
        }
        if triangles.len() < before {
            log::warn!("dropped {} degenerate faces", before - triangles.len());
        }
        let corners: Vec<[Vec3; 3]> =
            triangles.iter().map(|t| [vertices[t[0]], vertices[t[1]], vertices[t[2]]]).collect();
        let watertight = is_closed(&triangles);
        let bvh = Bvh::build(&corners);
        Ok(TriangleMesh { vertices, triangles, corners, watertight, bvh })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn corners(&self) -> &[[Vec3; 3]] {
        &self.corners
    }

    /// Every undirected edge is shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn bounds(&self) -> Aabb {
        self.bvh.bounds().expect("mesh has faces")
    }

    /// Nearest surface point in the mesh's own frame.
    pub fn nearest(&self, p: &Vec3) -> Nearest {
        self.bvh.nearest(p, &self.corners).expect("mesh has faces")
    }

    pub fn sqdist(&self, p: &Vec3) -> f64 {
        self.nearest(p).sqdist
    }

    pub fn nearest_exhaustive(&self, p: &Vec3) -> Nearest {
        bvh::nearest_exhaustive(p, &self.corners).expect("mesh has faces")
    }

    /// Squared distance from a world point to the mesh placed by `pose`.
    pub fn posed_sqdist(&self, p: &Vec3, pose: &ObjectPose) -> f64 {
        self.sqdist(&pose.apply_inverse(p))
    }

    /// Squared distance and the closest surface point, both in world space.
    pub fn posed_nearest(&self, p: &Vec3, pose: &ObjectPose) -> (f64, Vec3) {
        let n = self.nearest(&pose.apply_inverse(p));
        (n.sqdist, pose.apply(&n.point))
    }

    pub fn contains(&self, p: &Vec3) -> Result<bool> {
        if !self.watertight {
            return Err(ChainError::NotWatertight);
        }
        if !self.bounds().contains(p) {
            return Ok(false);
        }
        Ok(inside::ray_parity_inside(p, &self.corners))
    }

    pub fn posed_contains(&self, p: &Vec3, pose: &ObjectPose) -> Result<bool> {
        self.contains(&pose.apply_inverse(p))
    }

    /// Vertex positions transformed by `pose`.
    pub fn posed_vertices(&self, pose: &ObjectPose) -> Vec<Vec3> {
        self.vertices.iter().map(|v| pose.apply(v)).collect()
    }

    /// Vertices followed by face centroids; used as the object point cloud.
    pub fn surface_points(&self) -> Vec<Vec3> {
        let mut pts = self.vertices.clone();
        pts.extend(self.corners.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0));
        pts
    }

    /// Signed volume (positive for outward-facing winding).
    pub fn signed_volume(&self) -> f64 {
        self.corners.iter().map(|t| t[0].dot(&t[1].cross(&t[2]))).sum::<f64>() / 6.0
    }
}

fn is_closed(triangles: &[[usize; 3]]) -> bool {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}
