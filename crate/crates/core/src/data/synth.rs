//! Keyframed synthetic interactions. Feet are planted exactly (swing feet
//! move only above the skating gate) and every contact places a wrist or the
//! pelvis on an object face, approaching along that face's normal so the
//! surface distance of each frame is known in closed form.

use std::collections::BTreeMap;

use nalgebra::Rotation3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChainError, Result};
use crate::geometry::primitives::{cuboid, cylinder, icosphere};
use crate::geometry::TriangleMesh;
use crate::repr::{
    compute_contact_labels, decode_sequence, encode_sequence, yaw, ContactLabels, GlobalMotion, HoiSequence, Mat3, ObjectPose,
    DEFAULT_CONTACT_THRESHOLD,
};
use crate::skeleton::{SkeletonSpec, Vec3, LEFT_WRIST, PELVIS, RIGHT_WRIST};

pub const FPS: f64 = 20.0;
/// Pelvis height while standing; slightly below full extension so both legs
/// can reach their plants during a step.
pub const STAND: f64 = 0.86;
pub const LIFT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    Grasp,
    Carry,
    Push,
    SitOn,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Grasp => "grasp",
            Template::Carry => "carry",
            Template::Push => "push",
            Template::SitOn => "sit-on",
        }
    }

    pub fn supports(self, p: Primitive) -> bool {
        match self {
            Template::Grasp => true,
            Template::Carry => p != Primitive::Cylinder,
            Template::Push => p == Primitive::Box,
            Template::SitOn => p != Primitive::Sphere,
        }
    }

    fn phrasings(self) -> [&'static str; 2] {
        match self {
            Template::Grasp => [
                "a person reaches for the {obj} and picks it up with the {side} hand",
                "someone grabs a {obj} with their {side} hand and lifts it",
            ],
            Template::Carry => [
                "a person picks up the {obj} with both hands and carries it forward",
                "someone lifts a {obj} with two hands and walks ahead",
            ],
            Template::Push => ["a person pushes the {obj} forward with both hands", "someone shoves a heavy {obj} ahead"],
            Template::SitOn => ["a person sits down on the {obj}", "someone takes a seat on a {obj}"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Primitive {
    Box,
    Sphere,
    Cylinder,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Box => "box",
            Primitive::Sphere => "sphere",
            Primitive::Cylinder => "cylinder",
        }
    }

    fn noun(self, t: Template) -> &'static str {
        match (self, t) {
            (Primitive::Box, Template::Push) => "cabinet",
            (Primitive::Box, _) => "box",
            (Primitive::Sphere, _) => "ball",
            (Primitive::Cylinder, Template::SitOn) => "stool",
            (Primitive::Cylinder, _) => "bottle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub template: Template,
    pub primitives: Vec<Primitive>,
    pub min_frames: usize,
    pub max_frames: usize,
}

impl SyntheticScenario {
    pub fn new(template: Template, primitives: &[Primitive]) -> SyntheticScenario {
        SyntheticScenario { template, primitives: primitives.to_vec(), min_frames: 32, max_frames: 160 }
    }

    /// One scenario per template with every compatible primitive.
    pub fn defaults() -> Vec<SyntheticScenario> {
        use Primitive::*;
        vec![
            SyntheticScenario::new(Template::Grasp, &[Box, Sphere, Cylinder]),
            SyntheticScenario::new(Template::Carry, &[Box, Sphere]),
            SyntheticScenario::new(Template::Push, &[Box]),
            SyntheticScenario::new(Template::SitOn, &[Box, Cylinder]),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ChainError::Scenario(m));
        if self.primitives.is_empty() {
            return bad(format!("{} scenario lists no primitives", self.template.name()));
        }
        if let Some(p) = self.primitives.iter().find(|p| !self.template.supports(**p)) {
            return bad(format!("{} cannot use a {}", self.template.name(), p.name()));
        }
        if self.min_frames < 2 || self.min_frames > self.max_frames {
            return bad(format!("frame range {}..={}", self.min_frames, self.max_frames));
        }
        Ok(())
    }
}

/// One generated interaction with its construction-time contact table.
#[derive(Debug, Clone)]
pub struct SyntheticRecord {
    pub id: String,
    pub text: String,
    pub object_id: String,
    pub template: Template,
    pub primitive: Primitive,
    pub sequence: HoiSequence,
    /// Object mesh in its local frame.
    pub mesh: TriangleMesh,
    /// Labels recomputed from geometry.
    pub labels: ContactLabels,
    /// Labels known from the construction.
    pub intended: ContactLabels,
}

impl SyntheticRecord {
    /// Interaction joint slots that are in contact in at least one frame.
    pub fn contacting_slots(&self) -> Vec<usize> {
        (0..8).filter(|&k| self.labels.a.iter().any(|r| r[k])).collect()
    }

    /// Frames `start .. start + len`, re-encoded relative to the new first
    /// frame.
    pub fn crop(&self, start: usize, len: usize, spec: &SkeletonSpec) -> Result<SyntheticRecord> {
        let end = start + len;
        if len < 2 || end > self.sequence.len {
            return Err(ChainError::Shape(format!("crop {}..{} of {} frames", start, end, self.sequence.len)));
        }
        let d = decode_sequence(&self.sequence, spec)?;
        let motion = GlobalMotion { positions: d.positions[start..end].to_vec(), rotations: d.rotations[start..end].to_vec() };
        let sequence = encode_sequence(&motion, &d.objects[start..end], spec, self.sequence.fps)?;
        let cut = |l: &ContactLabels| ContactLabels { a: l.a[start..end].to_vec(), threshold: l.threshold };
        Ok(SyntheticRecord { sequence, labels: cut(&self.labels), intended: cut(&self.intended), ..self.clone() })
    }

    /// Grouping key: template, primitive and contacting joints.
    pub fn group_key(&self, spec: &SkeletonSpec) -> String {
        let joints: Vec<&str> = self
            .contacting_slots()
            .iter()
            .map(|&k| spec.joint_names[spec.interaction_joints[k]].as_str())
            .collect();
        let joints = if joints.is_empty() { "none".to_string() } else { joints.join("+") };
        format!("{}/{}/{}", self.template.name(), self.primitive.name(), joints)
    }
}

/// Generates `count` records, cycling through `scenarios`. Record `i` draws
/// from its own ChaCha stream, so output depends only on `(seed, i)`.
pub fn generate(scenarios: &[SyntheticScenario], count: usize, seed: u64) -> Result<Vec<SyntheticRecord>> {
    if count == 0 {
        return Err(ChainError::Scenario("count must be at least 1".into()));
    }
    if scenarios.is_empty() {
        return Err(ChainError::Scenario("no scenarios".into()));
    }
    for s in scenarios {
        s.validate()?;
    }
    let spec = SkeletonSpec::default();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            generate_one(&scenarios[i % scenarios.len()], i, &spec, &mut rng)
        })
        .collect()
}

/// Groups record ids by [`SyntheticRecord::group_key`].
pub fn group_records(records: &[SyntheticRecord], spec: &SkeletonSpec) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group_key(spec)).or_default().push(r.id.clone());
    }
    groups
}

#[derive(Debug, Clone)]
struct Key {
    pelvis: Vec3,
    /// Left, right.
    ankles: [Vec3; 2],
    wrists: [Vec3; 2],
    object: Vec3,
    /// Known surface distance per interaction slot, if any.
    gaps: [Option<f64>; 8],
}

fn smooth(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

struct Timeline {
    keys: Vec<Key>,
}

impl Timeline {
    fn last(&self) -> Key {
        self.keys.last().expect("timeline starts with a key").clone()
    }

    fn hold(&mut self, n: usize) {
        let k = self.last();
        self.keys.extend(std::iter::repeat(k).take(n));
    }

    /// Eases pelvis, wrists and object to `to`; feet stay planted.
    fn blend(&mut self, to: Key, n: usize) {
        let from = self.last();
        for f in 1..=n {
            if f == n {
                self.keys.push(to.clone());
                break;
            }
            let s = smooth(f as f64 / n as f64);
            let lerp = |a: &Vec3, b: &Vec3| a + (b - a) * s;
            let mut gaps = [None; 8];
            for (g, (a, b)) in gaps.iter_mut().zip(from.gaps.iter().zip(&to.gaps)) {
                if let (Some(a), Some(b)) = (a, b) {
                    *g = Some(a + (b - a) * s);
                }
            }
            self.keys.push(Key {
                pelvis: lerp(&from.pelvis, &to.pelvis),
                ankles: from.ankles,
                wrists: [lerp(&from.wrists[0], &to.wrists[0]), lerp(&from.wrists[1], &to.wrists[1])],
                object: lerp(&from.object, &to.object),
                gaps,
            });
        }
    }

    /// One foot advances `stride` along +Z: three frames of vertical lift,
    /// a horizontal swing above the gate, three frames of vertical descent.
    /// The pelvis advances half a stride; wrists always follow it, the object
    /// only when `carry`.
    fn step(&mut self, foot: usize, stride: f64, n: usize, carry: bool) {
        let from = self.last();
        let swing = n - 6;
        let start = from.ankles[foot];
        for f in 1..=n {
            let mut k = from.clone();
            let dz = stride * 0.5 * smooth(f as f64 / n as f64);
            let shift = Vec3::new(0.0, 0.0, dz);
            k.pelvis += shift;
            k.wrists[0] += shift;
            k.wrists[1] += shift;
            if carry {
                k.object += shift;
            }
            let (lift, fwd) = if f <= 3 {
                (smooth(f as f64 / 3.0), 0.0)
            } else if f <= 3 + swing {
                (1.0, smooth((f - 3) as f64 / swing as f64))
            } else {
                (1.0 - smooth((f - 3 - swing) as f64 / 3.0), 1.0)
            };
            k.ankles[foot] = start + Vec3::new(0.0, LIFT * lift, stride * fwd);
            if f == n {
                k.ankles[foot] = start + Vec3::new(0.0, 0.0, stride);
                k.pelvis = from.pelvis + Vec3::new(0.0, 0.0, stride * 0.5);
                k.wrists = [from.wrists[0] + Vec3::new(0.0, 0.0, stride * 0.5), from.wrists[1] + Vec3::new(0.0, 0.0, stride * 0.5)];
                if carry {
                    k.object = from.object + Vec3::new(0.0, 0.0, stride * 0.5);
                }
            }
            self.keys.push(k);
        }
    }
}

struct Rig {
    rest: Vec<Vec3>,
    offsets: Vec<Vec3>,
    hips: [usize; 2],
    knees: [usize; 2],
    ankles: [usize; 2],
    toes: [usize; 2],
    shoulders: [usize; 2],
    elbows: [usize; 2],
    wrists: [usize; 2],
}

impl Rig {
    fn new(spec: &SkeletonSpec) -> Rig {
        let ix = |n: &str| spec.index_of(n).expect("default skeleton joint");
        let pair = |a: &str, b: &str| [ix(a), ix(b)];
        Rig {
            rest: spec.rest_positions(),
            offsets: spec.bone_offsets.clone(),
            hips: pair("left_hip", "right_hip"),
            knees: pair("left_knee", "right_knee"),
            ankles: pair("left_ankle", "right_ankle"),
            toes: pair("left_foot", "right_foot"),
            shoulders: pair("left_shoulder", "right_shoulder"),
            elbows: pair("left_elbow", "right_elbow"),
            wrists: [LEFT_WRIST, RIGHT_WRIST],
        }
    }

    /// Ankle position for a foot planted with the toe at 1 cm, pelvis-relative
    /// XZ taken from the rest pose.
    fn plant(&self, side: usize, z: f64) -> Vec3 {
        let a = self.rest[self.ankles[side]];
        Vec3::new(a.x, 0.01 - self.offsets[self.toes[side]].y, a.z + z)
    }

    /// Arms hanging 60° below horizontal.
    fn hanging_wrist(&self, pelvis: &Vec3, side: usize) -> Vec3 {
        let angle = if side == 0 { -60f64.to_radians() } else { 60f64.to_radians() };
        let r = Rotation3::from_axis_angle(&Vec3::z_axis(), angle);
        let s = pelvis + self.rest[self.shoulders[side]];
        s + r * (self.offsets[self.elbows[side]] + self.offsets[self.wrists[side]])
    }
}

/// Middle joint of a two-bone chain from `root` to `target`, bent towards
/// `pole`. Errors when the target is out of reach.
fn two_bone(root: &Vec3, target: &Vec3, l1: f64, l2: f64, pole: &Vec3) -> Result<Vec3> {
    let d = (target - root).norm();
    if d > l1 + l2 - 1e-9 || d < (l1 - l2).abs() + 1e-9 {
        return Err(ChainError::Scenario(format!(
            "target at {:.4} m is out of reach for limbs {:.4} + {:.4}",
            d, l1, l2
        )));
    }
    let u = (target - root) / d;
    let v = (pole - u * pole.dot(&u)).normalize();
    let cos_a = (l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d);
    let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
    Ok(root + u * (l1 * cos_a) + v * (l1 * sin_a))
}

/// Pose in the person frame: positions plus global rotations aligning each
/// joint's rest bone to its current direction.
fn solve(rig: &Rig, spec: &SkeletonSpec, key: &Key) -> Result<(Vec<Vec3>, Vec<Mat3>)> {
    let mut p: Vec<Vec3> = rig.rest.iter().map(|r| key.pelvis + r).collect();
    for side in 0..2 {
        let hip = p[rig.hips[side]];
        let (l1, l2) = (rig.offsets[rig.knees[side]].norm(), rig.offsets[rig.ankles[side]].norm());
        p[rig.knees[side]] = two_bone(&hip, &key.ankles[side], l1, l2, &Vec3::new(0.0, 0.0, 1.0))?;
        p[rig.ankles[side]] = key.ankles[side];
        p[rig.toes[side]] = key.ankles[side] + rig.offsets[rig.toes[side]];

        let sh = p[rig.shoulders[side]];
        let (l1, l2) = (rig.offsets[rig.elbows[side]].norm(), rig.offsets[rig.wrists[side]].norm());
        let out = if side == 0 { 1.0 } else { -1.0 };
        let pole = Vec3::new(0.5 * out, -1.0, -0.5);
        p[rig.elbows[side]] = two_bone(&sh, &key.wrists[side], l1, l2, &pole)?;
        p[rig.wrists[side]] = key.wrists[side];
    }
    let n = spec.joint_count();
    let mut first_child = vec![None; n];
    for (c, par) in spec.bones().into_iter().rev() {
        first_child[par] = Some(c);
    }
    let mut rots = vec![Mat3::identity(); n];
    for j in 1..n {
        rots[j] = match first_child[j] {
            Some(c) => Rotation3::rotation_between(&rig.offsets[c], &(p[c] - p[j]))
                .unwrap_or_else(Rotation3::identity)
                .into_inner(),
            None => rots[spec.parent_of[j].expect("non-root")],
        };
    }
    Ok((p, rots))
}

/// Face point and outward normal on a convex mesh for a desired outward
/// direction `dir`, preferring the face that contains the projection of
/// `hint`. Distances along the normal from such a point are exact.
fn anchor(mesh: &TriangleMesh, dir: &Vec3, hint: &Vec3) -> (Vec3, Vec3) {
    let mut faces: Vec<(f64, Vec3, [Vec3; 3])> = mesh
        .corners()
        .iter()
        .map(|c| ((c[1] - c[0]).cross(&(c[2] - c[0])).normalize(), *c))
        .map(|(n, c)| (n.dot(dir), n, c))
        .collect();
    let best = faces.iter().map(|f| f.0).fold(f64::MIN, f64::max);
    faces.retain(|f| f.0 >= best - 1e-9);
    for (_, n, c) in &faces {
        let q = hint - n * (hint - c[0]).dot(n);
        let inside = (0..3).all(|e| (c[(e + 1) % 3] - c[e]).cross(&(q - c[e])).dot(n) >= -1e-12);
        if inside {
            return (q, *n);
        }
    }
    let (_, n, c) = faces
        .iter()
        .min_by(|a, b| {
            let ca = (a.2[0] + a.2[1] + a.2[2]) / 3.0;
            let cb = (b.2[0] + b.2[1] + b.2[2]) / 3.0;
            (ca - hint).norm().total_cmp(&(cb - hint).norm())
        })
        .expect("mesh has faces");
    ((c[0] + c[1] + c[2]) / 3.0, *n)
}

fn slot(spec: &SkeletonSpec, joint: usize) -> usize {
    spec.interaction_joints.iter().position(|&j| j == joint).expect("interaction joint")
}

fn generate_one(scenario: &SyntheticScenario, index: usize, spec: &SkeletonSpec, rng: &mut ChaCha8Rng) -> Result<SyntheticRecord> {
    let rig = Rig::new(spec);
    let template = scenario.template;
    let primitive = *scenario.primitives.choose(rng).expect("validated nonempty");
    let side = rng.gen_range(0..2usize);
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let pelvis = Vec3::new(0.0, STAND, 0.0);
    let wrist_rest = [rig.hanging_wrist(&pelvis, 0), rig.hanging_wrist(&pelvis, 1)];
    let start = Key {
        pelvis,
        ankles: [rig.plant(0, 0.0), rig.plant(1, 0.0)],
        wrists: wrist_rest,
        object: Vec3::zeros(),
        gaps: [None; 8],
    };
    let wrist_slot = [slot(spec, LEFT_WRIST), slot(spec, RIGHT_WRIST)];
    let frames = |u: &mut dyn FnMut(f64, f64) -> f64, lo: usize, hi: usize| u(lo as f64, hi as f64 + 1.0) as usize;

    let (mesh, keys) = match template {
        Template::Grasp => {
            let steps = frames(&mut u, 0, 1);
            let stride = u(0.15, 0.25);
            let reach_z = stride * steps as f64;
            let mesh = match primitive {
                Primitive::Box => cuboid(Vec3::new(u(0.04, 0.08), u(0.04, 0.08), u(0.04, 0.08))),
                Primitive::Sphere => icosphere(u(0.05, 0.09), 1),
                Primitive::Cylinder => cylinder(u(0.03, 0.05), u(0.08, 0.12), 16),
            };
            let sx = if side == 0 { 1.0 } else { -1.0 };
            let object = Vec3::new(sx * u(0.2, 0.3), STAND + u(0.1, 0.2), reach_z + u(0.3, 0.38));
            let mut tl = Timeline { keys: vec![Key { object, ..start.clone() }] };
            for s in 0..steps {
                let n = frames(&mut u, 10, 14);
                tl.step(s % 2, stride, n, false);
                tl.step((s + 1) % 2, stride, n, false);
            }
            tl.hold(frames(&mut u, 2, 4));
            let shoulder = tl.last().pelvis + rig.rest[rig.shoulders[side]];
            let mut dir = shoulder - object;
            dir.y = 0.0;
            let (q, n) = anchor(&mesh, &dir.normalize(), &Vec3::zeros());
            let contact = object + q;
            let mut pre = tl.last();
            pre.wrists[side] = contact + n * 0.2;
            pre.gaps[wrist_slot[side]] = Some(0.2);
            tl.blend(pre.clone(), frames(&mut u, 8, 12));
            let mut touch = pre;
            touch.wrists[side] = contact;
            touch.gaps[wrist_slot[side]] = Some(0.0);
            tl.blend(touch.clone(), frames(&mut u, 6, 9));
            tl.hold(frames(&mut u, 4, 8));
            let up = Vec3::new(0.0, u(0.08, 0.14), 0.0);
            let mut lifted = touch;
            lifted.wrists[side] += up;
            lifted.object += up;
            tl.blend(lifted, frames(&mut u, 8, 12));
            tl.hold(frames(&mut u, 4, 8));
            (mesh, tl.keys)
        }
        Template::Carry => {
            let mesh = match primitive {
                Primitive::Sphere => icosphere(u(0.12, 0.17), 1),
                _ => cuboid(Vec3::new(u(0.12, 0.2), u(0.08, 0.14), u(0.08, 0.14))),
            };
            let object = Vec3::new(0.0, STAND + u(0.18, 0.24), u(0.3, 0.36));
            let mut tl = Timeline { keys: vec![Key { object, ..start.clone() }] };
            tl.hold(frames(&mut u, 2, 4));
            let mut pre = tl.last();
            let mut touch = tl.last();
            for (s, sx) in [(0usize, 1.0), (1, -1.0)] {
                let (q, n) = anchor(&mesh, &Vec3::new(sx, 0.0, 0.0), &Vec3::zeros());
                pre.wrists[s] = object + q + n * 0.15;
                pre.gaps[wrist_slot[s]] = Some(0.15);
                touch.wrists[s] = object + q;
                touch.gaps[wrist_slot[s]] = Some(0.0);
            }
            tl.blend(pre, frames(&mut u, 8, 12));
            tl.blend(touch.clone(), frames(&mut u, 6, 9));
            let up = Vec3::new(0.0, u(0.06, 0.1), 0.0);
            let mut lifted = touch;
            lifted.wrists[0] += up;
            lifted.wrists[1] += up;
            lifted.object += up;
            tl.blend(lifted, frames(&mut u, 6, 10));
            let stride = u(0.15, 0.22);
            for _ in 0..frames(&mut u, 1, 2) {
                let n = frames(&mut u, 10, 14);
                tl.step(0, stride, n, true);
                tl.step(1, stride, n, true);
            }
            tl.hold(frames(&mut u, 3, 6));
            (mesh, tl.keys)
        }
        Template::Push => {
            let half = Vec3::new(u(0.3, 0.4), u(0.56, 0.65), u(0.2, 0.3));
            let mesh = cuboid(half);
            let object = Vec3::new(0.0, half.y, 0.28 + half.z);
            let mut tl = Timeline { keys: vec![Key { object, ..start.clone() }] };
            tl.hold(frames(&mut u, 2, 4));
            let height = u(0.95, 1.05) - object.y;
            let mut pre = tl.last();
            let mut touch = tl.last();
            for (s, sx) in [(0usize, 1.0), (1, -1.0)] {
                let hint = Vec3::new(sx * u(0.16, 0.22), height, -half.z);
                let (q, n) = anchor(&mesh, &Vec3::new(0.0, 0.0, -1.0), &hint);
                pre.wrists[s] = object + q + n * 0.15;
                pre.gaps[wrist_slot[s]] = Some(0.15);
                touch.wrists[s] = object + q;
                touch.gaps[wrist_slot[s]] = Some(0.0);
            }
            tl.blend(pre, frames(&mut u, 8, 12));
            tl.blend(touch, frames(&mut u, 6, 9));
            let stride = u(0.14, 0.2);
            for _ in 0..frames(&mut u, 1, 2) {
                let n = frames(&mut u, 10, 14);
                tl.step(0, stride, n, true);
                tl.step(1, stride, n, true);
            }
            tl.hold(frames(&mut u, 3, 6));
            (mesh, tl.keys)
        }
        Template::SitOn => {
            let top = u(0.42, 0.5);
            let (mesh, object) = match primitive {
                Primitive::Cylinder => {
                    let r = u(0.18, 0.22);
                    (cylinder(r, top / 2.0, 16), Vec3::new(0.0, top / 2.0, -0.12 - r))
                }
                _ => {
                    let half = Vec3::new(u(0.18, 0.24), top / 2.0, u(0.16, 0.22));
                    (cuboid(half), Vec3::new(0.0, top / 2.0, -0.12 - half.z))
                }
            };
            let mut tl = Timeline { keys: vec![Key { object, ..start.clone() }] };
            tl.hold(frames(&mut u, 2, 4));
            let pelvis_slot = slot(spec, PELVIS);
            let seat = Vec3::new(0.0, top, -0.22);
            let mut back = tl.last();
            back.pelvis = Vec3::new(seat.x, STAND, seat.z);
            back.wrists = [rig.hanging_wrist(&back.pelvis, 0), rig.hanging_wrist(&back.pelvis, 1)];
            back.gaps[pelvis_slot] = Some(STAND - top);
            tl.blend(back.clone(), frames(&mut u, 8, 12));
            let mut down = back;
            down.pelvis = seat;
            down.wrists = [rig.hanging_wrist(&seat, 0), rig.hanging_wrist(&seat, 1)];
            down.gaps[pelvis_slot] = Some(0.0);
            tl.blend(down, frames(&mut u, 12, 16));
            tl.hold(frames(&mut u, 6, 10));
            (mesh, tl.keys)
        }
    };
    let mut keys = keys;
    if keys.len() > scenario.max_frames {
        return Err(ChainError::Scenario(format!(
            "{} needs {} frames, more than the maximum {}",
            template.name(),
            keys.len(),
            scenario.max_frames
        )));
    }
    if keys.len() < scenario.min_frames {
        let last = keys.last().expect("nonempty").clone();
        keys.resize(scenario.min_frames, last);
    }

    // scene placement
    let heading = u(-std::f64::consts::PI, std::f64::consts::PI);
    let offset = Vec3::new(u(-1.0, 1.0), 0.0, u(-1.0, 1.0));
    let phrasing = *template.phrasings().choose(rng).expect("two phrasings");
    let world = yaw(heading);
    let place = |p: &Vec3| world * p + offset;
    let mut positions = Vec::with_capacity(keys.len());
    let mut rotations = Vec::with_capacity(keys.len());
    let mut objects = Vec::with_capacity(keys.len());
    let mut intended = Vec::with_capacity(keys.len());
    for k in &keys {
        let (p, r) = solve(&rig, spec, k)?;
        positions.push(p.iter().map(place).collect());
        let mut r: Vec<Mat3> = r.iter().map(|m| world * m).collect();
        r[0] = world;
        rotations.push(r);
        objects.push(ObjectPose { rotation: Vec3::new(0.0, heading, 0.0), translation: place(&k.object) });
        intended.push(k.gaps.map(|g| g.is_some_and(|g| g <= DEFAULT_CONTACT_THRESHOLD)));
    }
    let sequence = encode_sequence(&GlobalMotion { positions, rotations }, &objects, spec, FPS)?;
    let labels = compute_contact_labels(&sequence, spec, &mesh, DEFAULT_CONTACT_THRESHOLD)?;
    let side_word = if side == 0 { "left" } else { "right" };
    let text = phrasing.replace("{obj}", primitive.noun(template)).replace("{side}", side_word);
    Ok(SyntheticRecord {
        id: format!("seq_{:05}", index),
        text,
        object_id: format!("obj_{:05}", index),
        template,
        primitive,
        sequence,
        mesh,
        labels,
        intended: ContactLabels { a: intended, threshold: DEFAULT_CONTACT_THRESHOLD },
    })
}
