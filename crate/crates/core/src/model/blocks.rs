//! GST-GCN block (graph conv + temporal branches fused with the
//! semantic-consistent path) and the kinematics-based interaction module.

use chainhoi_nn::{
    impl_module, sinusoidal, GraphConv, LayerNorm, Linear, Mask, MultiHeadAttention, Result, TemporalConfig,
    TemporalMultiBranch, Tensor,
};
use chainhoi_nn::{FeedForward, NnError};
use rand::Rng;

use super::config::ModelConfig;
use super::layers::{ConditionDecoder, Conditions};
use crate::graph::CHAIN_COUNT;

/// Per-node projection to `D_t`, mean over nodes, then the two condition
/// decoders over the `L` frame tokens. Returns `[B, L, D_m]`.
#[derive(Debug, Clone)]
pub struct SemanticConsistent {
    pub proj_in: Linear,
    pub decoder: ConditionDecoder,
    pub proj_out: Linear,
}

impl_module!(SemanticConsistent { params: [], children: [proj_in, decoder, proj_out] });

impl SemanticConsistent {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Result<SemanticConsistent> {
        Ok(SemanticConsistent {
            proj_in: Linear::new(cfg.d_m, cfg.d_t, rng),
            decoder: ConditionDecoder::new(cfg.d_t, cfg.heads, cfg.ffn_mult * cfg.d_t, rng)?,
            proj_out: Linear::new(cfg.d_t, cfg.d_m, rng),
        })
    }

    pub fn forward(&self, z: &Tensor, cond: &Conditions) -> Result<Tensor> {
        let len = z.dim(1);
        let tokens = self.proj_in.forward(z)?.mean_axis(2, false)?;
        let pos: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let tokens = tokens.add(&sinusoidal(&pos, self.proj_in.d_out()))?;
        self.proj_out.forward(&self.decoder.forward(&tokens, cond)?)
    }
}

/// Per-frame decoder over the chain tokens: self-attention among the six
/// tokens, masked cross-attention into the joint tokens, FFN.
#[derive(Debug, Clone)]
pub struct KinematicDecoder {
    pub ln_self: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln_cross: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln_ffn: LayerNorm,
    pub ffn: FeedForward,
}

impl_module!(KinematicDecoder { params: [], children: [ln_self, self_attn, ln_cross, cross_attn, ln_ffn, ffn] });

impl KinematicDecoder {
    pub fn new<R: Rng>(d: usize, heads: usize, hidden: usize, rng: &mut R) -> Result<KinematicDecoder> {
        Ok(KinematicDecoder {
            ln_self: LayerNorm::new(d),
            self_attn: MultiHeadAttention::new(d, heads, rng)?,
            ln_cross: LayerNorm::new(d),
            cross_attn: MultiHeadAttention::new(d, heads, rng)?,
            ln_ffn: LayerNorm::new(d),
            ffn: FeedForward::new(d, hidden, rng),
        })
    }

    /// `chains`: `[B, C, d]` context-aware chain tokens; `joints`:
    /// `[B, L, N, d]`. Returns `[B·L, C, d]` and the cross-attention weights
    /// `[B·L, heads, C, N]`. The self-attention step does not depend on the
    /// frame, so it runs once per sequence before being broadcast.
    pub fn forward_with_weights(&self, chains: &Tensor, joints: &Tensor, mask: Option<&Mask>) -> Result<(Tensor, Tensor)> {
        if chains.ndim() != 3 || joints.ndim() != 4 || chains.dim(0) != joints.dim(0) {
            return Err(NnError::Shape(format!(
                "kinematic decoder chains {:?} / joints {:?}",
                chains.shape(),
                joints.shape()
            )));
        }
        let (b, l, n, d) = (joints.dim(0), joints.dim(1), joints.dim(2), joints.dim(3));
        let c = chains.dim(1);
        let h = self.ln_self.forward(chains)?;
        let kt = chains.add(&self.self_attn.forward(&h, &h, None)?)?;
        let q = self.ln_cross.forward(&kt)?;
        let per_frame = |t: &Tensor| -> Result<Tensor> {
            t.reshape(&[b, 1, c, d])?.broadcast_to(&[b, l, c, d])?.reshape(&[b * l, c, d])
        };
        let (kt, q) = (per_frame(&kt)?, per_frame(&q)?);
        let mem = joints.reshape(&[b * l, n, d])?;
        let (att, weights) = self.cross_attn.forward_with_weights(&q, &mem, mask)?;
        let kt = kt.add(&att)?;
        let out = kt.add(&self.ffn.forward(&self.ln_ffn.forward(&kt)?)?)?;
        Ok((out, weights))
    }

    pub fn forward(&self, chains: &Tensor, joints: &Tensor, mask: Option<&Mask>) -> Result<Tensor> {
        Ok(self.forward_with_weights(chains, joints, mask)?.0)
    }
}

#[derive(Debug, Clone)]
pub struct Kim {
    /// Learnable chain tokens `[6, D_t]`.
    pub chain_tokens: Tensor,
    pub context: ConditionDecoder,
    pub proj_joints: Linear,
    pub kinematic: KinematicDecoder,
    pub expand: Linear,
    pub fuse: Linear,
    mask: Option<Mask>,
}

impl_module!(Kim { params: [chain_tokens], children: [context, proj_joints, kinematic, expand, fuse] });

impl Kim {
    pub fn new<R: Rng>(cfg: &ModelConfig, mask: Option<Mask>, rng: &mut R) -> Result<Kim> {
        let (dt, n) = (cfg.d_t, cfg.nodes());
        let tokens: Vec<f64> = (0..CHAIN_COUNT * dt).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(Kim {
            chain_tokens: Tensor::param(tokens, &[CHAIN_COUNT, dt])?,
            context: ConditionDecoder::new(dt, cfg.heads, cfg.ffn_mult * dt, rng)?,
            proj_joints: Linear::new(cfg.d_m, dt, rng),
            kinematic: KinematicDecoder::new(dt, cfg.heads, cfg.ffn_mult * dt, rng)?,
            expand: Linear::new(CHAIN_COUNT * dt, n * dt, rng),
            fuse: Linear::new(2 * dt, cfg.d_m, rng),
            mask,
        })
    }

    pub fn mask(&self) -> Option<&Mask> {
        self.mask.as_ref()
    }

    /// Chain tokens after the context-aware decoder, `[B, 6, D_t]`.
    pub fn context_tokens(&self, batch: usize, cond: &Conditions) -> Result<Tensor> {
        let (c, dt) = (self.chain_tokens.dim(0), self.chain_tokens.dim(1));
        let q = self.chain_tokens.reshape(&[1, c, dt])?.broadcast_to(&[batch, c, dt])?;
        self.context.forward(&q, cond)
    }

    /// `y`: `[B, L, N, D_m]` → `[B, L, N, D_m]`.
    pub fn forward(&self, y: &Tensor, cond: &Conditions) -> Result<Tensor> {
        let (b, l, n) = (y.dim(0), y.dim(1), y.dim(2));
        let dt = self.chain_tokens.dim(1);
        let ctx = self.context_tokens(b, cond)?;
        let joints = self.proj_joints.forward(y)?;
        let kt = self.kinematic.forward(&ctx, &joints, self.mask.as_ref())?;
        let flat = kt.reshape(&[b * l, CHAIN_COUNT * dt])?;
        let expanded = self.expand.forward(&flat)?.reshape(&[b, l, n, dt])?;
        self.fuse.forward(&Tensor::concat(&[expanded, joints], 3)?)
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub graph: GraphConv,
    pub temporal: TemporalMultiBranch,
    pub scm: Option<SemanticConsistent>,
    pub fuse: Option<Linear>,
    pub kim: Option<Kim>,
}

impl_module!(Block { params: [], children: [graph, temporal, scm, fuse, kim] });

impl Block {
    pub fn new<R: Rng>(cfg: &ModelConfig, adjacency: &[f64], mask: Option<Mask>, rng: &mut R) -> Result<Block> {
        let dm = cfg.d_m;
        Ok(Block {
            graph: GraphConv::new(adjacency, cfg.nodes(), dm, dm, true, rng)?,
            temporal: TemporalMultiBranch::new(TemporalConfig { channels: dm, residual: true, activation: true }, rng)?,
            scm: if cfg.use_scm { Some(SemanticConsistent::new(cfg, rng)?) } else { None },
            fuse: if cfg.use_scm { Some(Linear::new(2 * dm, dm, rng)) } else { None },
            kim: if cfg.use_kim { Some(Kim::new(cfg, mask, rng)?) } else { None },
        })
    }

    /// Short-term path only: temporal branches over the graph convolution.
    pub fn short_term(&self, z: &Tensor) -> Result<Tensor> {
        self.temporal.forward(&self.graph.forward(z)?)
    }

    /// `z + KIM(Linear([z_l ; z_s]))` with the disabled parts skipped.
    pub fn forward(&self, z: &Tensor, cond: &Conditions) -> Result<Tensor> {
        let zs = self.short_term(z)?;
        let y = match (&self.scm, &self.fuse) {
            (Some(scm), Some(fuse)) => {
                let (b, l, n, dm) = (z.dim(0), z.dim(1), z.dim(2), z.dim(3));
                let zl = scm.forward(z, cond)?.reshape(&[b, l, 1, dm])?.broadcast_to(&[b, l, n, dm])?;
                fuse.forward(&Tensor::concat(&[zl, zs], 3)?)?
            }
            _ => zs,
        };
        let out = match &self.kim {
            Some(kim) => kim.forward(&y, cond)?,
            None => y,
        };
        z.add(&out)
    }
}
