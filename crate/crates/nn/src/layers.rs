//! Layers used by the denoiser. Weights are stored input-major
//! (`[d_in, d_out]`) so a forward pass is `x · W + b`.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::impl_module;
use crate::ops::nnops::Mask;
use crate::tensor::Tensor;

fn uniform<R: Rng>(rng: &mut R, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl_module!(Linear { params: [weight, bias], children: [] });

impl Linear {
    /// Uniform(±1/√d_in) init for both weight and bias.
    pub fn new<R: Rng>(d_in: usize, d_out: usize, rng: &mut R) -> Linear {
        let bound = 1.0 / (d_in as f64).sqrt();
        Linear {
            weight: Tensor::param(uniform(rng, d_in * d_out, bound), &[d_in, d_out]).unwrap(),
            bias: Tensor::param(uniform(rng, d_out, bound), &[d_out]).unwrap(),
        }
    }

    pub fn from_tensors(weight: Tensor, bias: Tensor) -> Result<Linear> {
        if weight.ndim() != 2 || bias.shape() != [weight.dim(1)] {
            return Err(NnError::Shape(format!(
                "linear weight {:?} / bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Linear { weight, bias })
    }

    pub fn d_in(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn d_out(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() == 1 {
            let y = x.reshape(&[1, x.dim(0)])?.matmul(&self.weight)?.add(&self.bias)?;
            return y.reshape(&[self.d_out()]);
        }
        x.matmul(&self.weight)?.add(&self.bias)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    eps: f64,
}

impl_module!(LayerNorm { params: [gamma, beta], children: [] });

impl LayerNorm {
    pub fn new(d: usize) -> LayerNorm {
        LayerNorm {
            gamma: Tensor::param(vec![1.0; d], &[d]).unwrap(),
            beta: Tensor::param(vec![0.0; d], &[d]).unwrap(),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.layer_norm_last(self.eps)?.mul(&self.gamma)?.add(&self.beta)
    }
}

/// Multi-head scaled dot-product attention with input and output projections.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    heads: usize,
}

impl_module!(MultiHeadAttention { params: [], children: [q, k, v, o] });

impl MultiHeadAttention {
    pub fn new<R: Rng>(d: usize, heads: usize, rng: &mut R) -> Result<MultiHeadAttention> {
        if heads == 0 || d % heads != 0 {
            return Err(NnError::Config(format!("width {} not divisible by {} heads", d, heads)));
        }
        Ok(MultiHeadAttention {
            q: Linear::new(d, d, rng),
            k: Linear::new(d, d, rng),
            v: Linear::new(d, d, rng),
            o: Linear::new(d, d, rng),
            heads,
        })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn width(&self) -> usize {
        self.q.d_in()
    }

    pub fn forward(&self, query: &Tensor, memory: &Tensor, mask: Option<&Mask>) -> Result<Tensor> {
        Ok(self.forward_with_weights(query, memory, mask)?.0)
    }

    /// Returns the output `[.., n_q, d]` and the attention weights
    /// `[B, heads, n_q, n_k]`. `mask` broadcasts against the weights.
    pub fn forward_with_weights(
        &self,
        query: &Tensor,
        memory: &Tensor,
        mask: Option<&Mask>,
    ) -> Result<(Tensor, Tensor)> {
        let d = self.width();
        if query.ndim() < 2 || memory.ndim() != query.ndim() {
            return Err(NnError::Shape(format!(
                "attention query {:?} / memory {:?}",
                query.shape(),
                memory.shape()
            )));
        }
        let nd = query.ndim();
        let lead = &query.shape()[..nd - 2];
        if &memory.shape()[..nd - 2] != lead || query.dim(nd - 1) != d || memory.dim(nd - 1) != d {
            return Err(NnError::Shape(format!(
                "attention query {:?} / memory {:?} (width {})",
                query.shape(),
                memory.shape(),
                d
            )));
        }
        let b: usize = lead.iter().product();
        let (nq, nk) = (query.dim(nd - 2), memory.dim(nd - 2));
        let h = self.heads;
        let dh = d / h;
        let q = self.q.forward(query)?.reshape(&[b, nq, h, dh])?.permute(&[0, 2, 1, 3])?;
        let k = self.k.forward(memory)?.reshape(&[b, nk, h, dh])?.permute(&[0, 2, 3, 1])?;
        let v = self.v.forward(memory)?.reshape(&[b, nk, h, dh])?.permute(&[0, 2, 1, 3])?;
        let logits = q.matmul(&k)?.scale(1.0 / (dh as f64).sqrt());
        let weights = match mask {
            Some(m) => logits.masked_softmax_last(m)?,
            None => logits.softmax_last()?,
        };
        let ctx = weights.matmul(&v)?.permute(&[0, 2, 1, 3])?.reshape(&[b, nq, d])?;
        let mut out_shape = lead.to_vec();
        out_shape.extend([nq, d]);
        let out = self.o.forward(&ctx)?.reshape(&out_shape)?;
        Ok((out, weights))
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl_module!(FeedForward { params: [], children: [fc1, fc2] });

impl FeedForward {
    pub fn new<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> FeedForward {
        FeedForward { fc1: Linear::new(d, hidden, rng), fc2: Linear::new(hidden, d, rng) }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(x)?.gelu())
    }
}

/// Spatial graph convolution `Y[t] = act(Â · X[t] · W + b)` applied per frame
/// of `[.., L, n, d_in]`.
#[derive(Debug, Clone)]
pub struct GraphConv {
    pub weight: Tensor,
    pub bias: Tensor,
    adjacency: Tensor,
    activation: bool,
}

impl_module!(GraphConv { params: [weight, bias], children: [] });

impl GraphConv {
    /// `adjacency` is the normalized `[n, n]` matrix; it is a constant.
    pub fn new<R: Rng>(adjacency: &[f64], n: usize, d_in: usize, d_out: usize, activation: bool, rng: &mut R) -> Result<GraphConv> {
        let lin = Linear::new(d_in, d_out, rng);
        GraphConv::from_parts(adjacency, n, lin.weight, lin.bias, activation)
    }

    pub fn from_parts(adjacency: &[f64], n: usize, weight: Tensor, bias: Tensor, activation: bool) -> Result<GraphConv> {
        let adjacency = Tensor::from_vec(adjacency.to_vec(), &[n, n])?;
        Linear::from_tensors(weight.clone(), bias.clone())?;
        Ok(GraphConv { weight, bias, adjacency, activation })
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let nd = x.ndim();
        if nd < 2 || x.dim(nd - 2) != self.adjacency.dim(0) {
            return Err(NnError::Shape(format!(
                "graph conv input {:?} vs {} nodes",
                x.shape(),
                self.adjacency.dim(0)
            )));
        }
        let xw = x.matmul(&self.weight)?;
        let y = self.adjacency.matmul(&xw)?.add(&self.bias)?;
        Ok(if self.activation { y.gelu() } else { y })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalConfig {
    pub channels: usize,
    pub residual: bool,
    /// GELU after each branch's 1×1 reduction.
    pub activation: bool,
}

/// Multi-branch temporal block over `[.., L, N, d]`: four branches at `d/4`
/// channels each (1×1 only, k=3 d=1, k=3 d=2, max-pool k=3), concatenated,
/// plus an optional residual.
#[derive(Debug, Clone)]
pub struct TemporalMultiBranch {
    pub reduce: Vec<Linear>,
    pub conv_d1: Tensor,
    pub conv_d2: Tensor,
    pub conv_bias: Tensor,
    config: TemporalConfig,
}

impl_module!(TemporalMultiBranch { params: [conv_d1, conv_d2, conv_bias], children: [reduce] });

pub const TEMPORAL_BRANCHES: usize = 4;

impl TemporalMultiBranch {
    pub fn new<R: Rng>(config: TemporalConfig, rng: &mut R) -> Result<TemporalMultiBranch> {
        let d = config.channels;
        if d == 0 || d % TEMPORAL_BRANCHES != 0 {
            return Err(NnError::Config(format!(
                "{} channels not divisible by {} temporal branches",
                d, TEMPORAL_BRANCHES
            )));
        }
        let c = d / TEMPORAL_BRANCHES;
        let bound = 1.0 / ((3 * c) as f64).sqrt();
        Ok(TemporalMultiBranch {
            reduce: (0..TEMPORAL_BRANCHES).map(|_| Linear::new(d, c, rng)).collect(),
            conv_d1: Tensor::param(uniform(rng, 3 * c * c, bound), &[3, c, c])?,
            conv_d2: Tensor::param(uniform(rng, 3 * c * c, bound), &[3, c, c])?,
            conv_bias: Tensor::param(uniform(rng, 2 * c, bound), &[2, c])?,
            config,
        })
    }

    pub fn config(&self) -> TemporalConfig {
        self.config
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let d = self.config.channels;
        if x.ndim() < 3 || x.dim(x.ndim() - 1) != d {
            return Err(NnError::Shape(format!("temporal block input {:?}, width {}", x.shape(), d)));
        }
        let c = d / TEMPORAL_BRANCHES;
        let mut branches = Vec::with_capacity(TEMPORAL_BRANCHES);
        for (i, red) in self.reduce.iter().enumerate() {
            let h = red.forward(x)?;
            let h = if self.config.activation { h.gelu() } else { h };
            let out = match i {
                0 => h,
                1 => h.temporal_conv(&self.conv_d1, 1)?.add(&self.conv_bias.narrow(0, 0, 1)?.reshape(&[c])?)?,
                2 => h.temporal_conv(&self.conv_d2, 2)?.add(&self.conv_bias.narrow(0, 1, 1)?.reshape(&[c])?)?,
                _ => h.temporal_max_pool(3)?,
            };
            branches.push(out);
        }
        let y = Tensor::concat(&branches, x.ndim() - 1)?;
        if self.config.residual {
            y.add(x)
        } else {
            Ok(y)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Tensor,
}

impl_module!(Embedding { params: [table], children: [] });

impl Embedding {
    pub fn new<R: Rng>(rows: usize, d: usize, rng: &mut R) -> Embedding {
        Embedding { table: Tensor::param(uniform(rng, rows * d, 1.0), &[rows, d]).unwrap() }
    }

    pub fn forward(&self, ids: &[usize]) -> Result<Tensor> {
        self.table.index_select_rows(ids)
    }
}

/// Fixed sinusoidal features `[positions.len(), d]` (sin on even, cos on odd
/// columns, base 10000).
pub fn sinusoidal(positions: &[f64], d: usize) -> Tensor {
    let mut data = Vec::with_capacity(positions.len() * d);
    for &p in positions {
        for j in 0..d {
            let freq = (10000f64).powf(-((j / 2 * 2) as f64) / d as f64);
            data.push(if j % 2 == 0 { (p * freq).sin() } else { (p * freq).cos() });
        }
    }
    Tensor::from_vec(data, &[positions.len(), d]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::module::Module;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn eye(n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        m
    }

    fn identity_linear(d: usize) -> Linear {
        Linear::from_tensors(Tensor::param(eye(d), &[d, d]).unwrap(), Tensor::param(vec![0.0; d], &[d]).unwrap()).unwrap()
    }

    #[test]
    fn linear_identity_and_zero_input() {
        let mut rng = StdRng::seed_from_u64(1);
        let x = Tensor::from_vec((0..12).map(|v| v as f64 * 0.3 - 1.0).collect(), &[3, 4]).unwrap();
        assert_eq!(identity_linear(4).forward(&x).unwrap().data(), x.data());
        let lin = Linear::new(4, 2, &mut rng);
        let y = lin.forward(&Tensor::zeros(&[3, 4])).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row, lin.bias.data());
        }
    }

    #[test]
    fn attention_single_key_returns_its_value() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut att = MultiHeadAttention::new(4, 2, &mut rng).unwrap();
        att.q = identity_linear(4);
        att.k = identity_linear(4);
        att.v = identity_linear(4);
        att.o = identity_linear(4);
        let q = Tensor::from_vec(vec![0.3, -0.1, 2.0, 0.5, 1.0, 1.0, 1.0, 1.0], &[2, 4]).unwrap();
        let kv = Tensor::from_vec(vec![0.7, -0.4, 0.2, 1.5], &[1, 4]).unwrap();
        let y = att.forward(&q.reshape(&[1, 2, 4]).unwrap(), &kv.reshape(&[1, 1, 4]).unwrap(), None).unwrap();
        for row in y.data().chunks(4) {
            for (a, b) in row.iter().zip(kv.data()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn attention_one_hot_mask_selects_row() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut att = MultiHeadAttention::new(4, 1, &mut rng).unwrap();
        att.v = identity_linear(4);
        att.o = identity_linear(4);
        let q = Tensor::from_vec((0..8).map(|v| v as f64 * 0.1).collect(), &[1, 2, 4]).unwrap();
        let kv = Tensor::from_vec((0..12).map(|v| (v as f64).cos()).collect(), &[1, 3, 4]).unwrap();
        let mask = Mask::new(vec![false, false, true, false, true, false], &[2, 3]).unwrap();
        let y = att.forward(&q, &kv, Some(&mask)).unwrap();
        assert_eq!(&y.data()[0..4], &kv.data()[8..12]);
        assert_eq!(&y.data()[4..8], &kv.data()[4..8]);
    }

    #[test]
    fn heads_must_divide_width() {
        let mut rng = StdRng::seed_from_u64(4);
        assert!(matches!(MultiHeadAttention::new(6, 4, &mut rng), Err(NnError::Config(_))));
    }

    #[test]
    fn graph_conv_identity_adjacency_is_per_node_linear() {
        let mut rng = StdRng::seed_from_u64(5);
        let gc = GraphConv::new(&eye(3), 3, 2, 4, false, &mut rng).unwrap();
        let x = Tensor::from_vec((0..12).map(|v| (v as f64).sin()).collect(), &[2, 3, 2]).unwrap();
        let want = x.matmul(&gc.weight).unwrap().add(&gc.bias).unwrap();
        assert_eq!(gc.forward(&x).unwrap().data(), want.data());
    }

    #[test]
    fn graph_conv_connected_pair_keeps_constant() {
        let mut rng = StdRng::seed_from_u64(6);
        let a_hat = [0.5, 0.5, 0.5, 0.5];
        let gc = GraphConv::new(&a_hat, 2, 3, 3, true, &mut rng).unwrap();
        let x = Tensor::from_vec(vec![0.4, -1.0, 2.0, 0.4, -1.0, 2.0], &[1, 2, 3]).unwrap();
        let y = gc.forward(&x).unwrap();
        assert_eq!(&y.data()[0..3], &y.data()[3..6]);
    }

    #[test]
    fn temporal_block_constant_fixed_point() {
        let mut rng = StdRng::seed_from_u64(7);
        let d = 8;
        let c = d / 4;
        let cfg = TemporalConfig { channels: d, residual: false, activation: false };
        let mut blk = TemporalMultiBranch::new(cfg, &mut rng).unwrap();
        // Reduction i picks channel group i; conv kernels average three taps.
        for (i, red) in blk.reduce.iter_mut().enumerate() {
            let mut w = vec![0.0; d * c];
            for j in 0..c {
                w[(i * c + j) * c + j] = 1.0;
            }
            *red = Linear::from_tensors(Tensor::param(w, &[d, c]).unwrap(), Tensor::param(vec![0.0; c], &[c]).unwrap()).unwrap();
        }
        let mut avg = vec![0.0; 3 * c * c];
        for tap in 0..3 {
            for j in 0..c {
                avg[(tap * c + j) * c + j] = 1.0 / 3.0;
            }
        }
        blk.conv_d1 = Tensor::param(avg.clone(), &[3, c, c]).unwrap();
        blk.conv_d2 = Tensor::param(avg, &[3, c, c]).unwrap();
        blk.conv_bias = Tensor::param(vec![0.0; 2 * c], &[2, c]).unwrap();
        let l = 9;
        let frame: Vec<f64> = (0..2 * d).map(|v| 0.25 * v as f64 - 1.0).collect();
        let x = Tensor::from_vec(frame.iter().cloned().cycle().take(l * 2 * d).collect(), &[l, 2, d]).unwrap();
        let y = blk.forward(&x).unwrap();
        // Interior frames (outside the dilation-2 zero padding) are fixed.
        for t in 2..l - 2 {
            for (a, b) in y.data()[t * 2 * d..(t + 1) * 2 * d].iter().zip(&frame) {
                assert!((a - b).abs() < 1e-14, "frame {}: {} vs {}", t, a, b);
            }
        }
    }

    #[test]
    fn temporal_block_rejects_bad_width() {
        let mut rng = StdRng::seed_from_u64(8);
        let cfg = TemporalConfig { channels: 6, residual: true, activation: true };
        assert!(matches!(TemporalMultiBranch::new(cfg, &mut rng), Err(NnError::Config(_))));
    }

    #[test]
    fn params_are_enumerated_once() {
        let mut rng = StdRng::seed_from_u64(9);
        let att = MultiHeadAttention::new(8, 2, &mut rng).unwrap();
        let names: Vec<String> = att.named_params().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 8);
        assert_eq!(names[0], "q.weight");
        assert_eq!(att.param_count(), 4 * (64 + 8));
    }
}
