//! Evaluation metrics: FSR, CD, OCD, PS, FID and R-Precision.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChainError, Result};
use crate::geometry::proxy::body_proxy_points;
use crate::geometry::TriangleMesh;
use crate::repr::{ContactLabels, ObjectPose};
use crate::skeleton::{SkeletonSpec, Vec3};

pub const FSR_HEIGHT: f64 = 0.05;
pub const FSR_SKID: f64 = 0.025;
pub const R_PRECISION_POOL: usize = 32;

/// Foot skating ratio over global joint positions. A transition `i → i+1`
/// counts when some foot joint is below [`FSR_HEIGHT`] at frame `i`; it
/// skates when one of those feet moves more than [`FSR_SKID`] horizontally.
pub fn fsr(positions: &[Vec<Vec3>], spec: &SkeletonSpec) -> Result<f64> {
    if positions.len() < 2 {
        return Err(ChainError::TooShort(positions.len()));
    }
    let mut gated = 0usize;
    let mut skating = 0usize;
    for w in positions.windows(2) {
        let mut any = false;
        let mut skid = false;
        for &j in &spec.foot_joints {
            if w[0][j].y < FSR_HEIGHT {
                any = true;
                let (dx, dz) = (w[1][j].x - w[0][j].x, w[1][j].z - w[0][j].z);
                skid |= (dx * dx + dz * dz).sqrt() > FSR_SKID;
            }
        }
        gated += any as usize;
        skating += skid as usize;
    }
    Ok(if gated == 0 { 0.0 } else { skating as f64 / gated as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactDistance {
    pub value: f64,
    /// False when no label was set; `value` is then 0.
    pub labeled: bool,
}

fn check_frames(positions: &[Vec<Vec3>], labels: &ContactLabels, poses: &[ObjectPose]) -> Result<()> {
    if labels.len() != positions.len() || poses.len() != positions.len() {
        return Err(ChainError::Shape(format!(
            "{} frames, {} label rows, {} object poses",
            positions.len(),
            labels.len(),
            poses.len()
        )));
    }
    Ok(())
}

/// Mean distance from each labeled interaction joint to the mesh placed at
/// the generated object pose.
pub fn contact_distance(
    positions: &[Vec<Vec3>],
    labels: &ContactLabels,
    mesh: &TriangleMesh,
    poses: &[ObjectPose],
    spec: &SkeletonSpec,
) -> Result<ContactDistance> {
    check_frames(positions, labels, poses)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((frame, row), pose) in positions.iter().zip(&labels.a).zip(poses) {
        for (k, &j) in spec.interaction_joints.iter().enumerate() {
            if row[k] {
                sum += mesh.posed_sqdist(&frame[j], pose).sqrt();
                count += 1;
            }
        }
    }
    Ok(if count == 0 {
        ContactDistance { value: 0.0, labeled: false }
    } else {
        ContactDistance { value: sum / count as f64, labeled: true }
    })
}

/// Labels cut or padded (with no contact) to `len` frames, so references of
/// a different duration can be scored against a generation.
pub fn align_labels(labels: &ContactLabels, len: usize) -> ContactLabels {
    let mut a: Vec<[bool; 8]> = labels.a.iter().take(len).copied().collect();
    a.resize(len, [false; 8]);
    ContactLabels { a, threshold: labels.threshold }
}

/// Minimum contact distance over the label sets of an instruction group.
/// Members without any label are skipped unless all of them are unlabeled.
pub fn optimal_contact_distance(
    positions: &[Vec<Vec3>],
    members: &[ContactLabels],
    mesh: &TriangleMesh,
    poses: &[ObjectPose],
    spec: &SkeletonSpec,
) -> Result<ContactDistance> {
    if members.is_empty() {
        return Err(ChainError::EmptyGroup(String::new()));
    }
    let mut best: Option<ContactDistance> = None;
    for m in members {
        let d = contact_distance(positions, &align_labels(m, positions.len()), mesh, poses, spec)?;
        best = match best {
            None => Some(d),
            Some(b) if d.labeled && (!b.labeled || d.value < b.value) => Some(d),
            keep => keep,
        };
    }
    Ok(best.expect("nonempty group"))
}

/// Fraction of body proxy points, pooled over all frames, strictly inside
/// the posed object mesh.
pub fn penetration_score(
    positions: &[Vec<Vec3>],
    mesh: &TriangleMesh,
    poses: &[ObjectPose],
    spec: &SkeletonSpec,
) -> Result<f64> {
    if poses.len() != positions.len() {
        return Err(ChainError::Shape(format!("{} frames, {} object poses", positions.len(), poses.len())));
    }
    let mut inside = 0usize;
    let mut total = 0usize;
    for (frame, pose) in positions.iter().zip(poses) {
        for p in body_proxy_points(frame, spec) {
            inside += mesh.posed_contains(&p, pose)? as usize;
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { inside as f64 / total as f64 })
}

fn moments(feats: &[Vec<f64>], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = feats.len() as f64;
    let mut mu = DVector::zeros(d);
    for f in feats {
        mu += DVector::from_column_slice(f);
    }
    mu /= n;
    let mut cov = DMatrix::zeros(d, d);
    for f in feats {
        let c = DVector::from_column_slice(f) - &mu;
        cov += &c * c.transpose();
    }
    cov /= (n - 1.0).max(1.0);
    if feats.len() <= d {
        cov += DMatrix::identity(d, d) * 1e-6;
    }
    (mu, cov)
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits of two feature sets. The cross
/// term uses `Tr((Σa Σb)^½) = Tr((Σa^½ Σb Σa^½)^½)`, whose argument is
/// symmetric, so both roots come from symmetric eigendecompositions.
pub fn fid(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let d = a.first().map(Vec::len).ok_or_else(|| ChainError::InvalidFeatures("empty feature set".into()))?;
    if b.is_empty() || a.iter().chain(b).any(|f| f.len() != d) {
        return Err(ChainError::InvalidFeatures("feature sets must be nonempty with equal widths".into()));
    }
    if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
        return Err(ChainError::InvalidFeatures("non-finite feature value".into()));
    }
    let (mu_a, cov_a) = moments(a, d);
    let (mu_b, cov_b) = moments(b, d);
    let ra = sqrt_psd(&cov_a);
    let cross = sqrt_psd(&(&ra * &cov_b * &ra)).trace();
    let v = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    Ok(v.max(0.0))
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Top-1/2/3 R-Precision. Samples are shuffled with `seed` and split into
/// pools of `pool`; the remainder is dropped. A sample's rank is the number
/// of texts in its pool strictly closer than its own.
pub fn r_precision(motion: &[Vec<f64>], text: &[Vec<f64>], pool: usize, seed: u64) -> Result<[f64; 3]> {
    if motion.len() != text.len() {
        return Err(ChainError::InvalidFeatures(format!("{} motion vs {} text features", motion.len(), text.len())));
    }
    if pool == 0 || motion.len() < pool {
        return Err(ChainError::Pool { pool, count: motion.len() });
    }
    let mut order: Vec<usize> = (0..motion.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut hits = [0usize; 3];
    let mut total = 0usize;
    for chunk in order.chunks_exact(pool) {
        for &i in chunk {
            let own = sqdist(&motion[i], &text[i]);
            let rank = chunk.iter().filter(|&&j| j != i && sqdist(&motion[i], &text[j]) < own).count();
            for (k, h) in hits.iter_mut().enumerate() {
                *h += (rank <= k) as usize;
            }
            total += 1;
        }
    }
    Ok(hits.map(|h| h as f64 / total as f64))
}

/// Mean Euclidean distance between paired motion and text features.
pub fn multimodal_distance(motion: &[Vec<f64>], text: &[Vec<f64>]) -> Result<f64> {
    if motion.is_empty() || motion.len() != text.len() {
        return Err(ChainError::InvalidFeatures(format!("{} motion vs {} text features", motion.len(), text.len())));
    }
    Ok(motion.iter().zip(text).map(|(m, t)| sqdist(m, t).sqrt()).sum::<f64>() / motion.len() as f64)
}

/// Mean distance between `pairs` random (seeded) pairs of motion features.
pub fn diversity(motion: &[Vec<f64>], pairs: usize, seed: u64) -> Result<f64> {
    if motion.len() < 2 || pairs == 0 {
        return Err(ChainError::InvalidFeatures(format!("diversity needs 2 features and 1 pair, got {} and {}", motion.len(), pairs)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..pairs {
        let picks = rand::seq::index::sample(&mut rng, motion.len(), 2);
        sum += sqdist(&motion[picks.index(0)], &motion[picks.index(1)]).sqrt();
    }
    Ok(sum / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub id: String,
    pub fsr: f64,
    pub cd: f64,
    pub ocd: f64,
    pub ps: f64,
    pub labeled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fsr: f64,
    pub cd: f64,
    pub ocd: f64,
    pub ps: f64,
    pub fid: Option<f64>,
    pub r_precision: Option<[f64; 3]>,
    pub multimodal_distance: Option<f64>,
    pub diversity: Option<f64>,
    pub sequences: Vec<SequenceMetrics>,
    /// Ids whose OCD exceeded CD although the CD reference is in the group.
    pub violations: Vec<String>,
}

impl MetricReport {
    /// Averages per-sequence values; CD and OCD average labeled sequences only.
    pub fn from_sequences(sequences: Vec<SequenceMetrics>, violations: Vec<String>) -> MetricReport {
        let mean = |f: &dyn Fn(&SequenceMetrics) -> f64, only_labeled: bool| {
            let v: Vec<f64> = sequences.iter().filter(|s| !only_labeled || s.labeled).map(f).collect();
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        MetricReport {
            fsr: mean(&|s| s.fsr, false),
            cd: mean(&|s| s.cd, true),
            ocd: mean(&|s| s.ocd, true),
            ps: mean(&|s| s.ps, false),
            fid: None,
            r_precision: None,
            multimodal_distance: None,
            diversity: None,
            sequences,
            violations,
        }
    }

    pub fn to_table(&self) -> String {
        let w = self.sequences.iter().map(|s| s.id.len()).max().unwrap_or(2).max(8);
        let mut out = format!("{:<w$}  {:>8}  {:>8}  {:>8}  {:>8}\n", "sequence", "FSR", "CD", "OCD", "PS", w = w);
        for s in &self.sequences {
            out += &format!("{:<w$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}\n", s.id, s.fsr, s.cd, s.ocd, s.ps, w = w);
        }
        out += &format!("{:<w$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}\n", "mean", self.fsr, self.cd, self.ocd, self.ps, w = w);
        if let Some(f) = self.fid {
            out += &format!("FID {:.6}\n", f);
        }
        if let Some(r) = self.r_precision {
            out += &format!("R-Precision top1 {:.4} top2 {:.4} top3 {:.4}\n", r[0], r[1], r[2]);
        }
        if let Some(v) = self.multimodal_distance {
            out += &format!("MultiModal Distance {:.4}\n", v);
        }
        if let Some(v) = self.diversity {
            out += &format!("Diversity {:.4}\n", v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::cuboid;

    fn standing(spec: &SkeletonSpec, x: f64) -> Vec<Vec3> {
        spec.rest_positions().iter().map(|p| p + Vec3::new(x, 0.0, 0.0)).collect()
    }

    #[test]
    fn fsr_planted_and_airborne() {
        let spec = SkeletonSpec::default();
        let planted: Vec<_> = (0..10).map(|_| standing(&spec, 0.0)).collect();
        assert_eq!(fsr(&planted, &spec).unwrap(), 0.0);
        let flying: Vec<_> = (0..10)
            .map(|i| standing(&spec, i as f64 * 0.1).iter().map(|p| p + Vec3::new(0.0, 1.0, 0.0)).collect())
            .collect();
        assert_eq!(fsr(&flying, &spec).unwrap(), 0.0);
        assert!(matches!(fsr(&planted[..1], &spec), Err(ChainError::TooShort(1))));
    }

    #[test]
    fn cd_single_pair() {
        let spec = SkeletonSpec::default();
        let mesh = cuboid(Vec3::new(0.5, 0.5, 0.5));
        let mut frame = vec![Vec3::new(5.0, 5.0, 5.0); 22];
        frame[spec.interaction_joints[3]] = Vec3::new(0.7, 0.0, 0.0);
        let mut row = [false; 8];
        row[3] = true;
        let labels = ContactLabels { a: vec![row], threshold: 0.05 };
        let d = contact_distance(&[frame], &labels, &mesh, &[ObjectPose::identity()], &spec).unwrap();
        assert!(d.labeled);
        assert!((d.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn r_precision_identity_alignment() {
        let feats: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i * i) as f64]).collect();
        assert_eq!(r_precision(&feats, &feats, 32, 1).unwrap(), [1.0; 3]);
        assert!(matches!(r_precision(&feats[..10], &feats[..10], 32, 1), Err(ChainError::Pool { .. })));
    }

    #[test]
    fn fid_of_identical_sets_is_zero() {
        let a: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos(), i as f64 * 0.01]).collect();
        assert!(fid(&a, &a).unwrap() < 1e-6);
    }
}
