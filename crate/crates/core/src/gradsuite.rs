//! Finite-difference checks over every differentiable building block, shared
//! by the `gradcheck` command and the test suite.

use std::sync::Arc;
use std::time::Instant;

use chainhoi_nn::gradcheck::{check, Report, DEFAULT_EPS};
use chainhoi_nn::{GraphConv, LayerNorm, Linear, Mask, Module, MultiHeadAttention, Tensor, TemporalConfig, TemporalMultiBranch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::synth::{generate, SyntheticScenario};
use crate::error::Result;
use crate::geometry::primitives::cuboid;
use crate::graph::build_hoi_graph;
use crate::losses::{loss_h, ContactTarget};
use crate::model::{ChainHoi, ConditionInput, ModelConfig};
use crate::repr::ContactLabels;
use crate::skeleton::{SkeletonSpec, Vec3};

pub const OPS: [&str; 7] = ["linear", "attention", "layer_norm", "graph_conv", "temporal_conv", "model_1block", "loss_h"];

/// Coordinates probed per input tensor and case.
const PROBES: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct OpResult {
    pub op: String,
    pub cases: usize,
    pub probes: usize,
    pub max_rel_error: f64,
    pub seconds: f64,
}

impl OpResult {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

fn uniform<R: Rng>(rng: &mut R, shape: &[usize], s: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec((0..n).map(|_| rng.gen_range(-s..s)).collect(), shape).unwrap()
}

/// Reduces an output to a scalar with fixed random weights, so every output
/// coordinate contributes.
fn project(y: &Tensor, w: &[f64]) -> chainhoi_nn::Result<Tensor> {
    y.mul(&Tensor::from_vec(w.to_vec(), y.shape())?).map(|t| t.sum_all())
}

fn weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn run_case(op: &str, rng: &mut ChaCha8Rng) -> Result<Report> {
    let eps = DEFAULT_EPS;
    let report = match op {
        "linear" => {
            let (din, dout) = (rng.gen_range(1..6), rng.gen_range(1..6));
            let x = uniform(rng, &[3, din], 1.0);
            let w = uniform(rng, &[din, dout], 1.0);
            let b = uniform(rng, &[dout], 1.0);
            let p = weights(rng, 3 * dout);
            check(|t| project(&Linear::from_tensors(t[1].clone(), t[2].clone())?.forward(&t[0])?, &p), &[x, w, b], PROBES, eps, rng)?
        }
        "attention" => {
            let (heads, nq, nk) = (2, rng.gen_range(1..4), rng.gen_range(2..5));
            let d = 4;
            let att = MultiHeadAttention::new(d, heads, rng)?;
            let q = uniform(rng, &[2, nq, d], 1.0);
            let m = uniform(rng, &[2, nk, d], 1.0);
            let mut allow: Vec<bool> = (0..nq * nk).map(|_| rng.gen_bool(0.6)).collect();
            for r in 0..nq {
                allow[r * nk] = true;
            }
            let mask = Mask::new(allow, &[nq, nk])?;
            let wq = att.q.weight.clone();
            let p = weights(rng, 2 * nq * d);
            check(
                |t| {
                    let mut a = att.clone();
                    a.q.weight = t[2].clone();
                    project(&a.forward(&t[0], &t[1], Some(&mask))?, &p)
                },
                &[q, m, wq],
                PROBES,
                eps,
                rng,
            )?
        }
        "layer_norm" => {
            let d = rng.gen_range(2..7);
            let x = uniform(rng, &[3, d], 2.0);
            let gamma = uniform(rng, &[d], 1.5);
            let beta = uniform(rng, &[d], 1.0);
            let p = weights(rng, 3 * d);
            check(
                |t| {
                    let mut ln = LayerNorm::new(d);
                    ln.gamma = t[1].clone();
                    ln.beta = t[2].clone();
                    project(&ln.forward(&t[0])?, &p)
                },
                &[x, gamma, beta],
                PROBES,
                eps,
                rng,
            )?
        }
        "graph_conv" => {
            let graph = build_hoi_graph(&SkeletonSpec::default())?;
            let n = graph.node_count;
            let (din, dout) = (3, 2);
            let x = uniform(rng, &[2, n, din], 1.0);
            let w = uniform(rng, &[din, dout], 1.0);
            let b = uniform(rng, &[dout], 1.0);
            let p = weights(rng, 2 * n * dout);
            let adj = graph.normalized.clone();
            check(
                |t| project(&GraphConv::from_parts(&adj, n, t[1].clone(), t[2].clone(), true)?.forward(&t[0])?, &p),
                &[x, w, b],
                PROBES,
                eps,
                rng,
            )?
        }
        "temporal_conv" => {
            let cfg = TemporalConfig { channels: 8, residual: true, activation: true };
            let block = TemporalMultiBranch::new(cfg, rng)?;
            let l = rng.gen_range(3..7);
            let x = uniform(rng, &[l, 3, 8], 1.0);
            let k1 = block.conv_d1.detach();
            let k2 = block.conv_d2.detach();
            let p = weights(rng, l * 3 * 8);
            check(
                |t| {
                    let mut b = block.clone();
                    b.conv_d1 = t[1].clone();
                    b.conv_d2 = t[2].clone();
                    project(&b.forward(&t[0])?, &p)
                },
                &[x, k1, k2],
                PROBES,
                eps,
                rng,
            )?
        }
        "model_1block" => {
            let cfg = ModelConfig {
                blocks: 1,
                d_m: 8,
                d_t: 8,
                heads: 2,
                object_point_tokens: 4,
                point_hidden: 8,
                text_layers: 1,
                vocabulary: vec!["lift".into(), "box".into()],
                ..ModelConfig::default()
            };
            let model = ChainHoi::new(&cfg, rng)?;
            let points: Vec<Vec3> = (0..12).map(|_| Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(0.5..0.9), rng.gen_range(-0.2..0.2))).collect();
            let cond = ConditionInput { text: model.tokenize("lift box")?, points: Arc::new(points) };
            let step = rng.gen_range(0..1000);
            let l = 4;
            let x = uniform(rng, &[1, l, 24, 12], 1.0);
            // key biases shift every logit of a query equally, so their exact
            // gradient is zero and only roundoff would be compared
            let named = model.named_params();
            let candidates: Vec<usize> = (0..named.len()).filter(|&i| !named[i].0.ends_with(".k.bias")).collect();
            let pick = candidates[rng.gen_range(0..candidates.len())];
            let target = named[pick].1.detach();
            let p = weights(rng, l * 24 * 12);
            check(
                |t| {
                    let mut m = model.clone();
                    *m.named_params_mut().swap_remove(pick).1 = t[1].clone();
                    Ok(project(&m.forward(&t[0], &[step], std::slice::from_ref(&cond)).map_err(|e| chainhoi_nn::NnError::Shape(e.to_string()))?, &p)?)
                },
                &[x, target],
                PROBES,
                eps,
                rng,
            )?
        }
        "loss_h" => {
            let spec = SkeletonSpec::default();
            let rec = generate(&SyntheticScenario::defaults(), 1, rng.gen())?.remove(0);
            let l = 6;
            let start = rng.gen_range(0..=rec.sequence.len - l);
            let seq = rec.crop(start, l, &spec)?.sequence;
            let noise: Vec<f64> = seq.frames.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
            let pred = Tensor::from_vec(noise, &[l, seq.nodes, 12])?;
            let labels = ContactLabels { a: (0..l).map(|_| std::array::from_fn(|_| rng.gen_bool(0.5))).collect(), threshold: 0.05 };
            let mesh = Arc::new(cuboid(Vec3::new(rng.gen_range(0.1..0.3), rng.gen_range(0.1..0.3), rng.gen_range(0.1..0.3))));
            let target = ContactTarget { labels, mesh, poses: seq.object_poses() };
            check(
                |t| loss_h(&t[0], &spec, &target).map_err(|e| chainhoi_nn::NnError::Shape(e.to_string())),
                &[pred],
                4 * PROBES,
                eps,
                rng,
            )?
        }
        other => return Err(crate::ChainError::Config(format!("unknown gradcheck op {}", other))),
    };
    Ok(report)
}

/// Runs `cases` random cases of each op in `ops`.
pub fn run(ops: &[&str], cases: usize, seed: u64) -> Result<Vec<OpResult>> {
    let mut out = Vec::with_capacity(ops.len());
    for (k, op) in ops.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let start = Instant::now();
        let mut worst = 0.0f64;
        let mut probes = 0;
        for _ in 0..cases {
            let r = run_case(op, &mut rng)?;
            probes += r.probes.len();
            worst = worst.max(r.max_rel_error());
        }
        out.push(OpResult { op: op.to_string(), cases, probes, max_rel_error: worst, seconds: start.elapsed().as_secs_f64() });
    }
    Ok(out)
}
