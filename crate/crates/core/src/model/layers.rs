//! Transformer blocks shared by the condition encoders and decoders.
//! All blocks are pre-norm: `x + f(LN(x))`.

use chainhoi_nn::{impl_module, FeedForward, LayerNorm, Mask, MultiHeadAttention, Result, Tensor};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub ln_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln_ffn: LayerNorm,
    pub ffn: FeedForward,
}

impl_module!(EncoderLayer { params: [], children: [ln_attn, attn, ln_ffn, ffn] });

impl EncoderLayer {
    pub fn new<R: Rng>(d: usize, heads: usize, hidden: usize, rng: &mut R) -> Result<EncoderLayer> {
        Ok(EncoderLayer {
            ln_attn: LayerNorm::new(d),
            attn: MultiHeadAttention::new(d, heads, rng)?,
            ln_ffn: LayerNorm::new(d),
            ffn: FeedForward::new(d, hidden, rng),
        })
    }

    pub fn forward(&self, x: &Tensor, mask: Option<&Mask>) -> Result<Tensor> {
        let h = self.ln_attn.forward(x)?;
        let x = x.add(&self.attn.forward(&h, &h, mask)?)?;
        x.add(&self.ffn.forward(&self.ln_ffn.forward(&x)?)?)
    }
}

/// Self-attention over the queries, cross-attention into a memory, FFN.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub ln_self: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln_cross: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln_ffn: LayerNorm,
    pub ffn: FeedForward,
}

impl_module!(DecoderLayer { params: [], children: [ln_self, self_attn, ln_cross, cross_attn, ln_ffn, ffn] });

impl DecoderLayer {
    pub fn new<R: Rng>(d: usize, heads: usize, hidden: usize, rng: &mut R) -> Result<DecoderLayer> {
        Ok(DecoderLayer {
            ln_self: LayerNorm::new(d),
            self_attn: MultiHeadAttention::new(d, heads, rng)?,
            ln_cross: LayerNorm::new(d),
            cross_attn: MultiHeadAttention::new(d, heads, rng)?,
            ln_ffn: LayerNorm::new(d),
            ffn: FeedForward::new(d, hidden, rng),
        })
    }

    pub fn forward(&self, x: &Tensor, memory: &Tensor, memory_mask: Option<&Mask>) -> Result<Tensor> {
        let h = self.ln_self.forward(x)?;
        let x = x.add(&self.self_attn.forward(&h, &h, None)?)?;
        let h = self.ln_cross.forward(&x)?;
        let x = x.add(&self.cross_attn.forward(&h, memory, memory_mask)?)?;
        x.add(&self.ffn.forward(&self.ln_ffn.forward(&x)?)?)
    }
}

/// Encoded conditions for a batch. `geometry` holds the object tokens with
/// the timestep token appended; `text_mask` hides padding keys.
#[derive(Debug, Clone)]
pub struct Conditions {
    pub geometry: Tensor,
    pub text: Tensor,
    pub text_mask: Mask,
}

/// Geometry decoder followed by text decoder.
#[derive(Debug, Clone)]
pub struct ConditionDecoder {
    pub geometry: DecoderLayer,
    pub text: DecoderLayer,
}

impl_module!(ConditionDecoder { params: [], children: [geometry, text] });

impl ConditionDecoder {
    pub fn new<R: Rng>(d: usize, heads: usize, hidden: usize, rng: &mut R) -> Result<ConditionDecoder> {
        Ok(ConditionDecoder {
            geometry: DecoderLayer::new(d, heads, hidden, rng)?,
            text: DecoderLayer::new(d, heads, hidden, rng)?,
        })
    }

    pub fn forward(&self, queries: &Tensor, cond: &Conditions) -> Result<Tensor> {
        let x = self.geometry.forward(queries, &cond.geometry, None)?;
        self.text.forward(&x, &cond.text, Some(&cond.text_mask))
    }
}
