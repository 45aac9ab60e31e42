//! Training objective: `L_diff + λ1·L_h + λ2·L_o`.
//!
//! `L_h` needs global joint positions of the predicted sequence, so the
//! decoder is also available as a differentiable op with an analytic
//! backward pass.

use std::sync::Arc;

use chainhoi_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{ChainError, Result};
use crate::geometry::TriangleMesh;
use crate::repr::{cumulative_headings, ContactLabels, ObjectPose, D_IN};
use crate::skeleton::{SkeletonSpec, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_h: f64,
    pub lambda_o: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_h: 2.0, lambda_o: 1.0 }
    }
}

fn rot(theta: f64, v: &Vec3) -> Vec3 {
    let (s, c) = theta.sin_cos();
    Vec3::new(c * v.x + s * v.z, v.y, -s * v.x + c * v.z)
}

/// Derivative of [`rot`] with respect to `theta`.
fn drot(theta: f64, v: &Vec3) -> Vec3 {
    let (s, c) = theta.sin_cos();
    Vec3::new(-s * v.x + c * v.z, 0.0, -c * v.x - s * v.z)
}

/// Rotation by `-theta`.
fn rot_t(theta: f64, v: &Vec3) -> Vec3 {
    rot(-theta, v)
}

/// Global positions `[L, K, 3]` of `joints` decoded from one sequence tensor
/// `[L, J+2, 12]`; differentiable with respect to the features.
pub fn decode_joints(x: &Tensor, spec: &SkeletonSpec, joints: &[usize]) -> Result<Tensor> {
    let n = spec.node_count();
    if x.ndim() != 3 || x.dim(1) != n || x.dim(2) != D_IN {
        return Err(ChainError::Shape(format!("decode input {:?}, expected [L, {}, {}]", x.shape(), n, D_IN)));
    }
    let len = x.dim(0);
    let k = joints.len();
    let rest = spec.rest_positions();
    let data = x.data();
    let at = |i: usize, node: usize, c: usize| data[(i * n + node) * D_IN + c];
    let r_a: Vec<f64> = (0..len).map(|i| at(i, 0, 0)).collect();
    let theta = cumulative_headings(&r_a);
    let mut roots = Vec::with_capacity(len);
    let (mut rx, mut rz) = (at(0, 0, 4), at(0, 0, 6));
    for i in 0..len {
        roots.push(Vec3::new(rx, at(i, 0, 3), rz));
        let v = rot(theta[i], &Vec3::new(at(i, 0, 1), 0.0, at(i, 0, 2)));
        rx += v.x;
        rz += v.z;
    }
    // local offsets j_p + rest, kept for the backward pass
    let mut local = vec![Vec3::zeros(); len * k];
    let mut out = Vec::with_capacity(len * k * 3);
    for i in 0..len {
        for (q, &j) in joints.iter().enumerate() {
            let p = if j == 0 {
                roots[i]
            } else {
                let l = Vec3::new(at(i, j, 0), at(i, j, 1), at(i, j, 2)) + rest[j];
                local[i * k + q] = l;
                roots[i] + rot(theta[i], &l)
            };
            out.extend([p.x, p.y, p.z]);
        }
    }
    let joints_c: Vec<usize> = joints.to_vec();
    let r_v: Vec<Vec3> = (0..len).map(|i| Vec3::new(at(i, 0, 1), 0.0, at(i, 0, 2))).collect();
    let numel = x.numel();
    Ok(Tensor::custom(out, &[len, k, 3], vec![x.clone()], move |g| {
        let mut gx = vec![0.0; numel];
        let mut g_root = vec![Vec3::zeros(); len];
        let mut g_theta = vec![0.0; len];
        for i in 0..len {
            for (q, &j) in joints_c.iter().enumerate() {
                let o = (i * k + q) * 3;
                let gp = Vec3::new(g[o], g[o + 1], g[o + 2]);
                g_root[i] += gp;
                if j != 0 {
                    let gl = rot_t(theta[i], &gp);
                    let base = (i * n + j) * D_IN;
                    gx[base] += gl.x;
                    gx[base + 1] += gl.y;
                    gx[base + 2] += gl.z;
                    g_theta[i] += gp.dot(&drot(theta[i], &local[i * k + q]));
                }
            }
        }
        // root_xz[i] = r_p[0].xz + Σ_{s<i} rot(θ_s) r_v[s]
        let mut later = Vec3::zeros(); // Σ_{i>s} g_root[i] (xz part)
        for s in (0..len).rev() {
            let base = s * n * D_IN;
            gx[base + 3] += g_root[s].y;
            if s + 1 < len {
                later += Vec3::new(g_root[s + 1].x, 0.0, g_root[s + 1].z);
            }
            let gv = rot_t(theta[s], &later);
            gx[base + 1] += gv.x;
            gx[base + 2] += gv.z;
            g_theta[s] += later.dot(&drot(theta[s], &r_v[s]));
        }
        let total = g_root.iter().fold(Vec3::zeros(), |a, b| a + b);
        gx[4] += total.x;
        gx[6] += total.z;
        // θ_i = Σ_{s<i} r_a[s]
        let mut acc = 0.0;
        for s in (0..len).rev() {
            gx[s * n * D_IN] += acc;
            acc += g_theta[s];
        }
        vec![Some(gx)]
    })?)
}

/// `Σ_i Σ_k a[i][k] · 𝒢(p[i][k])` for points `[L, K, 3]` against the mesh
/// placed at each frame's pose. The gradient is `2 a (p − closest)`.
pub fn contact_sqdist_sum(
    points: &Tensor,
    labels: &ContactLabels,
    mesh: &Arc<TriangleMesh>,
    poses: &[ObjectPose],
) -> Result<Tensor> {
    if points.ndim() != 3 || points.dim(2) != 3 {
        return Err(ChainError::Shape(format!("contact points {:?}", points.shape())));
    }
    let (len, k) = (points.dim(0), points.dim(1));
    if labels.len() != len || poses.len() != len || k != 8 {
        return Err(ChainError::Shape(format!(
            "{} frames of points x {}, {} label rows, {} poses",
            len,
            k,
            labels.len(),
            poses.len()
        )));
    }
    let p = points.data();
    let mut total = 0.0;
    let mut grad = vec![0.0; p.len()];
    for i in 0..len {
        for q in 0..k {
            if !labels.a[i][q] {
                continue;
            }
            let o = (i * k + q) * 3;
            let pt = Vec3::new(p[o], p[o + 1], p[o + 2]);
            let (d, closest) = mesh.posed_nearest(&pt, &poses[i]);
            total += d;
            let g = (pt - closest) * 2.0;
            grad[o..o + 3].copy_from_slice(g.as_slice());
        }
    }
    Ok(Tensor::custom(vec![total], &[1], vec![points.clone()], move |g| {
        vec![Some(grad.iter().map(|v| v * g[0]).collect())]
    })?)
}

/// One training example's geometry: labels, mesh and GT object poses.
#[derive(Debug, Clone)]
pub struct ContactTarget {
    pub labels: ContactLabels,
    pub mesh: Arc<TriangleMesh>,
    pub poses: Vec<ObjectPose>,
}

/// `L_h` for one predicted sequence `[L, J+2, 12]`.
pub fn loss_h(pred: &Tensor, spec: &SkeletonSpec, target: &ContactTarget) -> Result<Tensor> {
    if pred.ndim() != 3 || pred.dim(0) != target.labels.len() {
        return Err(ChainError::Shape(format!(
            "prediction {:?} vs {} label rows",
            pred.shape(),
            target.labels.len()
        )));
    }
    if target.labels.count() == 0 {
        return Ok(Tensor::zeros(&[1]));
    }
    let pts = decode_joints(pred, spec, &spec.interaction_joints)?;
    contact_sqdist_sum(&pts, &target.labels, &target.mesh, &target.poses)
}

/// `Σ_i ‖pred_i − gt_i‖²` over the 6-DoF object values, inputs `[L, 6]`.
pub fn loss_o(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    if pred.shape() != gt.shape() {
        return Err(ChainError::Shape(format!("object poses {:?} vs {:?}", pred.shape(), gt.shape())));
    }
    Ok(pred.sub(gt)?.square().sum_all())
}

/// Object 6-DoF slice `[.., L, 6]` of sequence tensors `[.., L, J+2, 12]`.
pub fn object_dofs(x: &Tensor) -> Result<Tensor> {
    let nd = x.ndim();
    let n = x.dim(nd - 2);
    let o = x.narrow(nd - 2, n - 1, 1)?.narrow(nd - 1, 0, 6)?;
    let mut shape = x.shape()[..nd - 2].to_vec();
    shape.push(6);
    Ok(o.reshape(&shape)?)
}

#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: Tensor,
    pub l_diff: f64,
    pub l_h: f64,
    pub l_o: f64,
}

/// Batch objective. `pred` and `target` are `[B, L, J+2, 12]`; each part is
/// summed per sequence and averaged over the batch (`L_diff` is the MSE over
/// all entries).
pub fn total_loss(
    pred: &Tensor,
    target: &Tensor,
    contacts: &[ContactTarget],
    spec: &SkeletonSpec,
    weights: LossWeights,
) -> Result<LossBreakdown> {
    if pred.shape() != target.shape() || pred.ndim() != 4 || pred.dim(0) != contacts.len() {
        return Err(ChainError::Shape(format!(
            "prediction {:?}, target {:?}, {} contact targets",
            pred.shape(),
            target.shape(),
            contacts.len()
        )));
    }
    let b = pred.dim(0);
    let diff = pred.sub(target)?.square().mean_all();
    let mut total = diff.clone();
    let mut l_h = 0.0;
    let mut l_o = 0.0;
    if weights.lambda_h != 0.0 {
        let mut parts = Vec::with_capacity(b);
        for (s, c) in contacts.iter().enumerate() {
            let p = pred.narrow(0, s, 1)?;
            let p = p.reshape(&p.shape()[1..])?;
            parts.push(loss_h(&p, spec, c)?);
        }
        let lh = Tensor::concat(&parts, 0)?.mean_all();
        l_h = lh.item();
        total = total.add(&lh.scale(weights.lambda_h))?;
    }
    if weights.lambda_o != 0.0 {
        let lo = loss_o(&object_dofs(pred)?, &object_dofs(target)?)?.scale(1.0 / b as f64);
        l_o = lo.item();
        total = total.add(&lo.scale(weights.lambda_o))?;
    }
    Ok(LossBreakdown { l_diff: diff.item(), l_h, l_o, total: total.reshape(&[])? })
}
