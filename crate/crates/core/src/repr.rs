//! Joint-level HOI representation: every frame is `J + 2` nodes of 12 values.
//!
//! Node layout:
//! - root: `[r_a, r_v.x, r_v.z, r_y, r_p.x, r_p.y, r_p.z, 0 × 5]`
//! - joint `j ≥ 1`: `[j_p(3), j_v(3), j_r(6)]`, all in the heading frame of
//!   the current frame; `j_p` is stored relative to the joint's rest position
//! - foot-contact node: four 0/1 flags, then zeros
//! - object node: `[axis-angle(3), translation(3), 0 × 6]`
//!
//! The heading frame of frame `i` is the yaw `Σ_{s<i} r_a[s]`, so the first
//! frame always faces +Z in feature space.

use nalgebra::{Matrix3, Rotation3};

use crate::error::{ChainError, Result};
use crate::geometry::TriangleMesh;
use crate::skeleton::{SkeletonSpec, Vec3};

pub type Mat3 = Matrix3<f64>;

pub const D_IN: usize = 12;
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.05;
pub const FOOT_HEIGHT_THRESHOLD: f64 = 0.05;
pub const FOOT_VELOCITY_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectPose {
    /// Axis-angle, radians.
    pub rotation: Vec3,
    pub translation: Vec3,
}

impl ObjectPose {
    pub fn identity() -> ObjectPose {
        ObjectPose { rotation: Vec3::zeros(), translation: Vec3::zeros() }
    }

    pub fn matrix(&self) -> Mat3 {
        Rotation3::from_scaled_axis(self.rotation).into_inner()
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.matrix() * p + self.translation
    }

    pub fn apply_inverse(&self, p: &Vec3) -> Vec3 {
        self.matrix().transpose() * (p - self.translation)
    }

    pub fn to_array(&self) -> [f64; 6] {
        let (r, t) = (self.rotation, self.translation);
        [r.x, r.y, r.z, t.x, t.y, t.z]
    }

    pub fn from_slice(v: &[f64]) -> ObjectPose {
        ObjectPose { rotation: Vec3::new(v[0], v[1], v[2]), translation: Vec3::new(v[3], v[4], v[5]) }
    }
}

/// Per-frame global joint positions and rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMotion {
    pub positions: Vec<Vec<Vec3>>,
    pub rotations: Vec<Vec<Mat3>>,
}

impl GlobalMotion {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoiSequence {
    pub frames: Vec<f64>,
    pub len: usize,
    pub nodes: usize,
    pub fps: f64,
}

impl HoiSequence {
    pub fn new(frames: Vec<f64>, len: usize, nodes: usize, fps: f64) -> Result<HoiSequence> {
        if frames.len() != len * nodes * D_IN {
            return Err(ChainError::InvalidSequence(format!(
                "{} values for {} frames x {} nodes x {}",
                frames.len(),
                len,
                nodes,
                D_IN
            )));
        }
        Ok(HoiSequence { frames, len, nodes, fps })
    }

    pub fn zeros(len: usize, nodes: usize, fps: f64) -> HoiSequence {
        HoiSequence { frames: vec![0.0; len * nodes * D_IN], len, nodes, fps }
    }

    pub fn node(&self, frame: usize, node: usize) -> &[f64] {
        let o = (frame * self.nodes + node) * D_IN;
        &self.frames[o..o + D_IN]
    }

    pub fn node_mut(&mut self, frame: usize, node: usize) -> &mut [f64] {
        let o = (frame * self.nodes + node) * D_IN;
        &mut self.frames[o..o + D_IN]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.len)
            .map(|i| (0..self.nodes).map(|n| self.node(i, n).to_vec()).collect())
            .collect()
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>], fps: f64) -> Result<HoiSequence> {
        let len = nested.len();
        let nodes = nested.first().map_or(0, |f| f.len());
        let mut frames = Vec::with_capacity(len * nodes * D_IN);
        for (i, f) in nested.iter().enumerate() {
            if f.len() != nodes || f.iter().any(|n| n.len() != D_IN) {
                return Err(ChainError::InvalidSequence(format!("frame {} is not {} x {}", i, nodes, D_IN)));
            }
            for n in f {
                frames.extend_from_slice(n);
            }
        }
        HoiSequence::new(frames, len, nodes, fps)
    }

    pub fn object_poses(&self) -> Vec<ObjectPose> {
        (0..self.len).map(|i| ObjectPose::from_slice(self.node(i, self.nodes - 1))).collect()
    }

    /// Checks the shape against `spec` and the foot-contact node contents.
    pub fn validate(&self, spec: &SkeletonSpec) -> Result<()> {
        if self.nodes != spec.node_count() {
            return Err(ChainError::InvalidSequence(format!(
                "{} nodes, skeleton needs {}",
                self.nodes,
                spec.node_count()
            )));
        }
        if self.frames.iter().any(|v| !v.is_finite()) {
            return Err(ChainError::InvalidSequence("non-finite value".into()));
        }
        for i in 0..self.len {
            let f = self.node(i, spec.foot_contact_node());
            if f[..4].iter().any(|&c| c != 0.0 && c != 1.0) || f[4..].iter().any(|&c| c != 0.0) {
                return Err(ChainError::InvalidSequence(format!("frame {} foot-contact node {:?}", i, f)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactLabels {
    /// `a[i][k]`: interaction joint `k` touches the object in frame `i`.
    pub a: Vec<[bool; 8]>,
    pub threshold: f64,
}

impl ContactLabels {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn count(&self) -> usize {
        self.a.iter().flatten().filter(|&&b| b).count()
    }

    /// Start of the `len`-frame window with the most set labels (earliest
    /// on ties).
    pub fn busiest_window(&self, len: usize) -> usize {
        if len >= self.a.len() {
            return 0;
        }
        let per: Vec<usize> = self.a.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
        let mut sum: usize = per[..len].iter().sum();
        let (mut best, mut at) = (sum, 0);
        for s in 1..=per.len() - len {
            sum = sum + per[s + len - 1] - per[s - 1];
            if sum > best {
                best = sum;
                at = s;
            }
        }
        at
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.a.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<u8>], threshold: f64) -> Result<ContactLabels> {
        let mut a = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != 8 || r.iter().any(|&v| v > 1) {
                return Err(ChainError::InvalidSequence(format!("contact label row {} is {:?}", i, r)));
            }
            let mut row = [false; 8];
            for (k, &v) in r.iter().enumerate() {
                row[k] = v == 1;
            }
            a.push(row);
        }
        Ok(ContactLabels { a, threshold })
    }
}

/// Global joint positions, joint rotations and object poses recovered from a
/// sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedMotion {
    pub positions: Vec<Vec<Vec3>>,
    /// Root entries are the pure heading rotation.
    pub rotations: Vec<Vec<Mat3>>,
    pub headings: Vec<f64>,
    pub objects: Vec<ObjectPose>,
    pub foot_contacts: Vec<[bool; 4]>,
}

pub fn yaw(theta: f64) -> Mat3 {
    let (s, c) = theta.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotates an XZ vector by the yaw `theta` (same convention as [`yaw`]).
pub fn yaw_xz(theta: f64, x: f64, z: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * x + s * z, -s * x + c * z)
}

pub fn heading_of(r: &Mat3) -> f64 {
    let f = r * Vec3::z();
    f.x.atan2(f.z)
}

pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = a - t * (a / t).round();
    if w <= -std::f64::consts::PI {
        w + t
    } else {
        w
    }
}

pub fn cumulative_headings(r_a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(r_a.len());
    let mut acc = 0.0;
    for &a in r_a {
        out.push(acc);
        acc += a;
    }
    out
}

pub fn rotation_from_6d(v: &[f64]) -> Mat3 {
    let c0 = Vec3::new(v[0], v[1], v[2]);
    let c1 = Vec3::new(v[3], v[4], v[5]);
    let a1 = c0.normalize();
    let a2 = (c1 - a1 * a1.dot(&c1)).normalize();
    let a3 = a1.cross(&a2);
    Mat3::from_columns(&[a1, a2, a3])
}

fn to_6d(r: &Mat3) -> [f64; 6] {
    [r[(0, 0)], r[(1, 0)], r[(2, 0)], r[(0, 1)], r[(1, 1)], r[(2, 1)]]
}

fn forward_diffs<T: Copy>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    let mut out: Vec<T> = (0..n - 1).map(&f).collect();
    out.push(out[n - 2]);
    out
}

pub fn encode_sequence(motion: &GlobalMotion, objects: &[ObjectPose], spec: &SkeletonSpec, fps: f64) -> Result<HoiSequence> {
    let len = motion.len();
    let jn = spec.joint_count();
    if len < 2 {
        return Err(ChainError::TooShort(len));
    }
    if motion.rotations.len() != len || objects.len() != len {
        return Err(ChainError::InvalidMotion(format!(
            "{} position frames, {} rotation frames, {} object poses",
            len,
            motion.rotations.len(),
            objects.len()
        )));
    }
    for i in 0..len {
        if motion.positions[i].len() != jn || motion.rotations[i].len() != jn {
            return Err(ChainError::InvalidMotion(format!("frame {} does not have {} joints", i, jn)));
        }
        let finite = motion.positions[i].iter().all(|p| p.iter().all(|v| v.is_finite()))
            && motion.rotations[i].iter().all(|r| r.iter().all(|v| v.is_finite()))
            && objects[i].to_array().iter().all(|v| v.is_finite());
        if !finite {
            return Err(ChainError::InvalidMotion(format!("non-finite value in frame {}", i)));
        }
    }

    let pos = &motion.positions;
    let abs: Vec<f64> = motion.rotations.iter().map(|r| heading_of(&r[0])).collect();
    let r_a = forward_diffs(len, |i| wrap_angle(abs[i + 1] - abs[i]));
    let theta = cumulative_headings(&r_a);
    let r_v = forward_diffs(len, |i| {
        let d = pos[i + 1][0] - pos[i][0];
        yaw_xz(-theta[i], d.x, d.z)
    });
    let contacts = derive_foot_contacts(pos, spec, FOOT_HEIGHT_THRESHOLD, FOOT_VELOCITY_THRESHOLD)?;
    let rest = spec.rest_positions();

    let mut seq = HoiSequence::zeros(len, spec.node_count(), fps);
    for i in 0..len {
        let root = pos[i][0];
        let inv = yaw(theta[i]).transpose();
        let n = seq.node_mut(i, 0);
        n[0] = r_a[i];
        n[1] = r_v[i].0;
        n[2] = r_v[i].1;
        n[3] = root.y;
        n[4] = root.x;
        n[5] = root.y;
        n[6] = root.z;
        for j in 1..jn {
            let jp = inv * (pos[i][j] - root) - rest[j];
            // the last frame repeats the previous frame's feature
            let jv = if i + 1 < len {
                inv * (pos[i + 1][j] - pos[i][j])
            } else {
                yaw(theta[i - 1]).transpose() * (pos[i][j] - pos[i - 1][j])
            };
            let jr = to_6d(&(inv * motion.rotations[i][j]));
            let n = seq.node_mut(i, j);
            n[..3].copy_from_slice(jp.as_slice());
            n[3..6].copy_from_slice(jv.as_slice());
            n[6..].copy_from_slice(&jr);
        }
        let f = seq.node_mut(i, spec.foot_contact_node());
        for (k, &c) in contacts[i].iter().enumerate() {
            f[k] = if c { 1.0 } else { 0.0 };
        }
        seq.node_mut(i, spec.object_node())[..6].copy_from_slice(&objects[i].to_array());
    }
    Ok(seq)
}

pub fn decode_sequence(seq: &HoiSequence, spec: &SkeletonSpec) -> Result<DecodedMotion> {
    if seq.nodes != spec.node_count() || seq.frames.len() != seq.len * seq.nodes * D_IN {
        return Err(ChainError::InvalidSequence(format!(
            "{} nodes x {} frames for a {}-node skeleton",
            seq.nodes,
            seq.len,
            spec.node_count()
        )));
    }
    let len = seq.len;
    let jn = spec.joint_count();
    let r_a: Vec<f64> = (0..len).map(|i| seq.node(i, 0)[0]).collect();
    let theta = cumulative_headings(&r_a);
    let rest = spec.rest_positions();
    let first = seq.node(0, 0);
    let (mut x, mut z) = (first[4], first[6]);

    let mut out = DecodedMotion {
        positions: Vec::with_capacity(len),
        rotations: Vec::with_capacity(len),
        headings: theta.clone(),
        objects: seq.object_poses(),
        foot_contacts: Vec::with_capacity(len),
    };
    for i in 0..len {
        let rn = seq.node(i, 0);
        let root = Vec3::new(x, rn[3], z);
        let r = yaw(theta[i]);
        let mut p = Vec::with_capacity(jn);
        let mut rots = Vec::with_capacity(jn);
        p.push(root);
        rots.push(r);
        for j in 1..jn {
            let n = seq.node(i, j);
            let jp = Vec3::new(n[0], n[1], n[2]);
            p.push(root + r * (jp + rest[j]));
            rots.push(r * rotation_from_6d(&n[6..]));
        }
        out.positions.push(p);
        out.rotations.push(rots);
        let f = seq.node(i, spec.foot_contact_node());
        out.foot_contacts.push([f[0] > 0.5, f[1] > 0.5, f[2] > 0.5, f[3] > 0.5]);
        let (dx, dz) = yaw_xz(theta[i], rn[1], rn[2]);
        x += dx;
        z += dz;
    }
    Ok(out)
}

/// Contact flag per foot joint: height below `height_thresh` and forward
/// difference speed below `velocity_thresh`.
pub fn derive_foot_contacts(
    positions: &[Vec<Vec3>],
    spec: &SkeletonSpec,
    height_thresh: f64,
    velocity_thresh: f64,
) -> Result<Vec<[bool; 4]>> {
    let len = positions.len();
    if positions.iter().any(|f| f.len() != spec.joint_count()) {
        return Err(ChainError::Shape("frame joint count differs from the skeleton".into()));
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let mut row = [false; 4];
        for (k, &j) in spec.foot_joints.iter().enumerate() {
            let speed = match (i + 1 < len, i > 0) {
                (true, _) => (positions[i + 1][j] - positions[i][j]).norm(),
                (false, true) => (positions[i][j] - positions[i - 1][j]).norm(),
                _ => 0.0,
            };
            row[k] = positions[i][j].y < height_thresh && speed < velocity_thresh;
        }
        out.push(row);
    }
    Ok(out)
}

/// Labels interaction joints within `threshold` of the object surface, with
/// the mesh posed by each frame's object pose.
pub fn compute_contact_labels(
    seq: &HoiSequence,
    spec: &SkeletonSpec,
    mesh: &TriangleMesh,
    threshold: f64,
) -> Result<ContactLabels> {
    let decoded = decode_sequence(seq, spec)?;
    Ok(contact_labels_from_motion(&decoded.positions, &decoded.objects, spec, mesh, threshold))
}

pub fn contact_labels_from_motion(
    positions: &[Vec<Vec3>],
    objects: &[ObjectPose],
    spec: &SkeletonSpec,
    mesh: &TriangleMesh,
    threshold: f64,
) -> ContactLabels {
    let t2 = threshold * threshold;
    let a = positions
        .iter()
        .zip(objects)
        .map(|(p, pose)| {
            let mut row = [false; 8];
            for (k, &j) in spec.interaction_joints.iter().enumerate() {
                row[k] = mesh.posed_sqdist(&p[j], pose) <= t2;
            }
            row
        })
        .collect();
    ContactLabels { a, threshold }
}
