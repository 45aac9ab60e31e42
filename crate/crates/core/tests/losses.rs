use std::sync::Arc;

use chainhoi::geometry::primitives::cuboid;
use chainhoi::losses::{loss_h, loss_o, object_dofs, total_loss, ContactTarget, LossWeights};
use chainhoi::repr::{decode_sequence, ContactLabels, HoiSequence, ObjectPose};
use chainhoi::skeleton::{SkeletonSpec, Vec3, LEFT_WRIST};
use chainhoi_nn::Tensor;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const WRIST_SLOT: usize = 6;

fn rest(len: usize) -> (HoiSequence, Vec<Vec<Vec3>>) {
    let spec = SkeletonSpec::default();
    let seq = HoiSequence::zeros(len, 24, 20.0);
    let pos = decode_sequence(&seq, &spec).unwrap().positions;
    (seq, pos)
}

fn labels(len: usize, set: &[(usize, usize)]) -> ContactLabels {
    let mut a = vec![[false; 8]; len];
    for &(i, k) in set {
        a[i][k] = true;
    }
    ContactLabels { a, threshold: 0.05 }
}

fn tensor(seq: &HoiSequence) -> Tensor {
    Tensor::from_vec(seq.frames.clone(), &[seq.len, seq.nodes, 12]).unwrap()
}

#[test]
fn hand_computed_two_frame_contact_loss() {
    let spec = SkeletonSpec::default();
    assert_eq!(spec.interaction_joints[WRIST_SLOT], LEFT_WRIST);
    let (seq, pos) = rest(2);
    let p = pos[0][LEFT_WRIST];
    // unit cube of half-size 0.1; its -x face sits 0.3 from the wrist in frame
    // 0 and 0.2 in frame 1
    let poses = vec![
        ObjectPose { rotation: Vec3::zeros(), translation: p + Vec3::new(0.4, 0.0, 0.0) },
        ObjectPose { rotation: Vec3::zeros(), translation: p + Vec3::new(0.3, 0.0, 0.0) },
    ];
    let target = ContactTarget { labels: labels(2, &[(0, WRIST_SLOT), (1, WRIST_SLOT)]), mesh: Arc::new(cuboid(Vec3::new(0.1, 0.1, 0.1))), poses };
    let l = loss_h(&tensor(&seq), &spec, &target).unwrap().item();
    assert!((l - (0.09 + 0.04)).abs() < 1e-12, "{}", l);
}

#[test]
fn joint_on_surface_contributes_nothing() {
    let spec = SkeletonSpec::default();
    let (seq, pos) = rest(2);
    let p = pos[1][LEFT_WRIST];
    let poses = vec![ObjectPose { rotation: Vec3::zeros(), translation: p + Vec3::new(0.1, 0.0, 0.0) }; 2];
    let target = ContactTarget { labels: labels(2, &[(1, WRIST_SLOT)]), mesh: Arc::new(cuboid(Vec3::new(0.1, 0.1, 0.1))), poses };
    assert!(loss_h(&tensor(&seq), &spec, &target).unwrap().item() < 1e-12);
}

#[test]
fn label_length_mismatch_is_a_shape_error() {
    let spec = SkeletonSpec::default();
    let (seq, _) = rest(3);
    let target = ContactTarget { labels: labels(2, &[]), mesh: Arc::new(cuboid(Vec3::new(0.1, 0.1, 0.1))), poses: vec![ObjectPose::identity(); 3] };
    assert!(matches!(loss_h(&tensor(&seq), &spec, &target), Err(chainhoi::ChainError::Shape(_))));
}

#[test]
fn loss_o_matches_naive_sum() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..20 {
        let l = rng.gen_range(1..30);
        let a: Vec<f64> = (0..l * 6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..l * 6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut want = 0.0;
        for i in 0..l {
            for c in 0..6 {
                want += (a[i * 6 + c] - b[i * 6 + c]).powi(2);
            }
        }
        let got = loss_o(&Tensor::from_vec(a, &[l, 6]).unwrap(), &Tensor::from_vec(b, &[l, 6]).unwrap()).unwrap().item();
        assert!((got - want).abs() < 1e-12);
    }
    assert!(loss_o(&Tensor::zeros(&[2, 6]), &Tensor::zeros(&[3, 6])).is_err());
}

fn batch(rng: &mut StdRng) -> (Tensor, Tensor, Vec<ContactTarget>) {
    let (b, l) = (2, 4);
    let n = b * l * 24 * 12;
    let target: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
    let pred: Vec<f64> = target.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
    let mesh = Arc::new(cuboid(Vec3::new(0.15, 0.2, 0.1)));
    let contacts = (0..b)
        .map(|_| ContactTarget {
            labels: ContactLabels { a: (0..l).map(|_| std::array::from_fn(|_| rng.gen_bool(0.4))).collect(), threshold: 0.05 },
            mesh: mesh.clone(),
            poses: (0..l).map(|_| ObjectPose { rotation: Vec3::zeros(), translation: Vec3::new(0.3, 0.9, 0.2) }).collect(),
        })
        .collect();
    (Tensor::from_vec(pred, &[b, l, 24, 12]).unwrap(), Tensor::from_vec(target, &[b, l, 24, 12]).unwrap(), contacts)
}

#[test]
fn total_loss_is_the_weighted_sum_of_its_parts() {
    let spec = SkeletonSpec::default();
    let mut rng = StdRng::seed_from_u64(2);
    let (pred, target, contacts) = batch(&mut rng);
    let parts = total_loss(&pred, &target, &contacts, &spec, LossWeights::default()).unwrap();
    let (p, t) = (pred.data(), target.data());
    let mse = p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64;
    let seq_len = 4 * 24 * 12;
    let mut lh = 0.0;
    let mut lo = 0.0;
    for s in 0..2 {
        let one = Tensor::from_vec(p[s * seq_len..(s + 1) * seq_len].to_vec(), &[4, 24, 12]).unwrap();
        lh += loss_h(&one, &spec, &contacts[s]).unwrap().item() / 2.0;
        for i in 0..4 {
            for c in 0..6 {
                let k = s * seq_len + (i * 24 + 23) * 12 + c;
                lo += (p[k] - t[k]).powi(2) / 2.0;
            }
        }
    }
    assert!((parts.l_diff - mse).abs() < 1e-12);
    assert!((parts.l_h - lh).abs() < 1e-12);
    assert!((parts.l_o - lo).abs() < 1e-12);
    assert!((parts.total.item() - (mse + 2.0 * lh + lo)).abs() < 1e-10);
    assert!(lh > 0.0 && lo > 0.0);
}

#[test]
fn zero_weights_leave_only_the_diffusion_term() {
    let spec = SkeletonSpec::default();
    let mut rng = StdRng::seed_from_u64(3);
    let (pred, target, contacts) = batch(&mut rng);
    let parts = total_loss(&pred, &target, &contacts, &spec, LossWeights { lambda_h: 0.0, lambda_o: 0.0 }).unwrap();
    assert_eq!(parts.total.item(), parts.l_diff);
}

#[test]
fn perfect_prediction_without_contacts_is_zero() {
    let spec = SkeletonSpec::default();
    let mut rng = StdRng::seed_from_u64(4);
    let (_, target, mut contacts) = batch(&mut rng);
    for c in &mut contacts {
        c.labels.a.iter_mut().for_each(|r| *r = [false; 8]);
    }
    let parts = total_loss(&target, &target, &contacts, &spec, LossWeights::default()).unwrap();
    assert_eq!(parts.total.item(), 0.0);
}

#[test]
fn object_dofs_are_the_first_six_object_channels() {
    let x = Tensor::from_vec((0..2 * 3 * 24 * 12).map(|v| v as f64).collect(), &[2, 3, 24, 12]).unwrap();
    let o = object_dofs(&x).unwrap();
    assert_eq!(o.shape(), &[2, 3, 6]);
    assert_eq!(&o.data()[..6], &x.data()[23 * 12..23 * 12 + 6]);
}
