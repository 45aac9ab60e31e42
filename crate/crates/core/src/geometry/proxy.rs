use crate::skeleton::{SkeletonSpec, Vec3};

pub const SAMPLES_PER_BONE: usize = 4;

/// Joint positions followed by four evenly spaced points inside every bone
/// (at 1/5 .. 4/5 from parent to child).
pub fn body_proxy_points(joints: &[Vec3], spec: &SkeletonSpec) -> Vec<Vec3> {
    let bones = spec.bones();
    let mut out = Vec::with_capacity(joints.len() + SAMPLES_PER_BONE * bones.len());
    out.extend_from_slice(joints);
    for (child, parent) in bones {
        let (a, b) = (joints[parent], joints[child]);
        for k in 1..=SAMPLES_PER_BONE {
            let t = k as f64 / (SAMPLES_PER_BONE + 1) as f64;
            out.push(a + (b - a) * t);
        }
    }
    out
}
