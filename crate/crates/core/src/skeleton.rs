//! Skeleton description: joint tree, rest offsets and the joint subsets used
//! for object interaction and foot contact.

use nalgebra::Vector3;

use crate::error::{ChainError, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSpec {
    pub joint_names: Vec<String>,
    /// `None` for the root.
    pub parent_of: Vec<Option<usize>>,
    /// Rest offset of each joint from its parent, meters (root: zero).
    pub bone_offsets: Vec<Vec3>,
    /// Pelvis, feet, neck, shoulders and hands, in that fixed order.
    pub interaction_joints: [usize; 8],
    /// Ankles and toes.
    pub foot_joints: [usize; 4],
}

pub const PELVIS: usize = 0;
pub const LEFT_FOOT: usize = 10;
pub const RIGHT_FOOT: usize = 11;
pub const NECK: usize = 12;
pub const LEFT_SHOULDER: usize = 16;
pub const RIGHT_SHOULDER: usize = 17;
pub const LEFT_WRIST: usize = 20;
pub const RIGHT_WRIST: usize = 21;

const SMPL22: [(&str, Option<usize>, [f64; 3]); 22] = [
    ("pelvis", None, [0.0, 0.0, 0.0]),
    ("left_hip", Some(0), [0.06, -0.09, 0.0]),
    ("right_hip", Some(0), [-0.06, -0.09, 0.0]),
    ("spine1", Some(0), [0.0, 0.11, 0.0]),
    ("left_knee", Some(1), [0.04, -0.38, 0.0]),
    ("right_knee", Some(2), [-0.04, -0.38, 0.0]),
    ("spine2", Some(3), [0.0, 0.13, 0.0]),
    ("left_ankle", Some(4), [0.0, -0.39, -0.04]),
    ("right_ankle", Some(5), [0.0, -0.39, -0.04]),
    ("spine3", Some(6), [0.0, 0.05, 0.02]),
    ("left_foot", Some(7), [0.02, -0.06, 0.12]),
    ("right_foot", Some(8), [-0.02, -0.06, 0.12]),
    ("neck", Some(9), [0.0, 0.21, -0.03]),
    ("left_collar", Some(9), [0.07, 0.12, -0.02]),
    ("right_collar", Some(9), [-0.07, 0.12, -0.02]),
    ("head", Some(12), [0.0, 0.09, 0.05]),
    ("left_shoulder", Some(13), [0.11, 0.03, -0.01]),
    ("right_shoulder", Some(14), [-0.11, 0.03, -0.01]),
    ("left_elbow", Some(16), [0.26, -0.01, -0.02]),
    ("right_elbow", Some(17), [-0.26, -0.01, -0.02]),
    ("left_wrist", Some(18), [0.25, 0.01, 0.0]),
    ("right_wrist", Some(19), [-0.25, 0.01, 0.0]),
];

/// Pelvis height at which the toes rest at 1 cm in the rest pose.
pub const STANDING_HEIGHT: f64 = 0.93;

impl Default for SkeletonSpec {
    /// 22-joint SMPL-style layout, Y up, facing +Z, left side at +X.
    fn default() -> Self {
        SkeletonSpec {
            joint_names: SMPL22.iter().map(|j| j.0.to_string()).collect(),
            parent_of: SMPL22.iter().map(|j| j.1).collect(),
            bone_offsets: SMPL22.iter().map(|j| Vec3::from(j.2)).collect(),
            interaction_joints: [PELVIS, LEFT_FOOT, RIGHT_FOOT, NECK, LEFT_SHOULDER, RIGHT_SHOULDER, LEFT_WRIST, RIGHT_WRIST],
            foot_joints: [7, 8, LEFT_FOOT, RIGHT_FOOT],
        }
    }
}

impl SkeletonSpec {
    pub fn joint_count(&self) -> usize {
        self.parent_of.len()
    }

    /// `J + 2`: joints, the foot-contact node and the object node.
    pub fn node_count(&self) -> usize {
        self.joint_count() + 2
    }

    pub fn foot_contact_node(&self) -> usize {
        self.joint_count()
    }

    pub fn object_node(&self) -> usize {
        self.joint_count() + 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Child-parent pairs, one per non-root joint.
    pub fn bones(&self) -> Vec<(usize, usize)> {
        self.parent_of
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|p| (j, p)))
            .collect()
    }

    /// Rest-pose joint positions relative to the root.
    pub fn rest_positions(&self) -> Vec<Vec3> {
        let mut out = vec![Vec3::zeros(); self.joint_count()];
        for j in 0..self.joint_count() {
            if let Some(p) = self.parent_of[j] {
                out[j] = out[p] + self.bone_offsets[j];
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.joint_count();
        let bad = |m: String| Err(ChainError::InvalidSpec(m));
        if n == 0 || self.joint_names.len() != n || self.bone_offsets.len() != n {
            return bad(format!(
                "{} names, {} parents, {} offsets",
                self.joint_names.len(),
                n,
                self.bone_offsets.len()
            ));
        }
        if self.parent_of[0].is_some() {
            return bad("joint 0 must be the root".into());
        }
        for (j, p) in self.parent_of.iter().enumerate().skip(1) {
            // parents must precede children, which also rules out cycles
            match p {
                Some(p) if *p < j => {}
                _ => return bad(format!("joint {} has parent {:?}", j, p)),
            }
        }
        let distinct = |xs: &[usize]| {
            let mut v = xs.to_vec();
            v.sort_unstable();
            v.dedup();
            v.len() == xs.len() && v.iter().all(|&x| x < n)
        };
        if !distinct(&self.interaction_joints) || !distinct(&self.foot_joints) {
            return bad("interaction/foot joints must be distinct and in range".into());
        }
        if self.interaction_joints[0] != 0 {
            return bad("interaction joints must start with the pelvis".into());
        }
        Ok(())
    }
}
