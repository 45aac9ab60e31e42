//! The ChainHOI denoiser: condition encoders, stacked GST-GCN + KIM blocks
//! and input/output projections. Predicts the clean sample `m̂_0`.

pub mod blocks;
pub mod config;
pub mod layers;
pub mod points;
pub mod text;

use std::sync::Arc;

use chainhoi_nn::{sinusoidal, Linear, Mask, Module, Tensor};
use rand::Rng;

pub use blocks::{Block, Kim, KinematicDecoder, SemanticConsistent};
pub use config::ModelConfig;
pub use layers::{ConditionDecoder, Conditions, DecoderLayer, EncoderLayer};
pub use points::PointEncoder;
pub use text::{TextEncoder, Vocabulary};

use crate::error::{ChainError, Result};
use crate::graph::{build_chain_attention_mask, build_hoi_graph_with, build_kinetic_chains};
use crate::repr::D_IN;
use crate::skeleton::{SkeletonSpec, Vec3};

/// Per-sample conditioning input. Empty `text` means the null condition.
#[derive(Debug, Clone)]
pub struct ConditionInput {
    pub text: Vec<usize>,
    pub points: Arc<Vec<Vec3>>,
}

#[derive(Debug, Clone)]
pub struct ChainHoi {
    pub text: TextEncoder,
    pub points: PointEncoder,
    pub timestep: Linear,
    pub input: Linear,
    pub blocks: Vec<Block>,
    pub output: Linear,
    config: ModelConfig,
    vocabulary: Vocabulary,
}

impl Module for ChainHoi {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        use chainhoi_nn::module::join;
        self.text.visit(&join(prefix, "text_stub"), out);
        self.points.visit(&join(prefix, "point_stub"), out);
        self.timestep.visit(&join(prefix, "timestep"), out);
        self.input.visit(&join(prefix, "input"), out);
        self.blocks.visit(&join(prefix, "blocks"), out);
        self.output.visit(&join(prefix, "output"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        use chainhoi_nn::module::join;
        self.text.visit_mut(&join(prefix, "text_stub"), out);
        self.points.visit_mut(&join(prefix, "point_stub"), out);
        self.timestep.visit_mut(&join(prefix, "timestep"), out);
        self.input.visit_mut(&join(prefix, "input"), out);
        self.blocks.visit_mut(&join(prefix, "blocks"), out);
        self.output.visit_mut(&join(prefix, "output"), out);
    }
}

impl ChainHoi {
    pub fn new<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<ChainHoi> {
        config.validate()?;
        let spec = SkeletonSpec::default();
        if spec.joint_count() != config.joints {
            return Err(ChainError::Config(format!(
                "model expects {} joints, skeleton has {}",
                config.joints,
                spec.joint_count()
            )));
        }
        let graph = build_hoi_graph_with(&spec, config.object_to_all_joints)?;
        let chains = build_kinetic_chains(&spec)?;
        let mask = if config.kim_mask {
            let allow = build_chain_attention_mask(&chains, spec.node_count())?;
            Some(Mask::new(allow, &[chains.chains.len(), spec.node_count()])?)
        } else {
            None
        };
        let dt = config.d_t;
        let text = TextEncoder::new(config.vocab_rows(), dt, config.heads, config.text_layers, config.ffn_mult * dt, false, rng)?;
        let points = PointEncoder::new(config.point_hidden, dt, config.object_point_tokens, rng);
        let timestep = Linear::new(dt, dt, rng);
        let input = Linear::new(D_IN, config.d_m, rng);
        let blocks = (0..config.blocks)
            .map(|_| Block::new(config, &graph.normalized, mask.clone(), rng))
            .collect::<chainhoi_nn::Result<Vec<_>>>()?;
        let output = Linear::new(config.d_m, D_IN, rng);
        Ok(ChainHoi {
            text,
            points,
            timestep,
            input,
            blocks,
            output,
            config: config.clone(),
            vocabulary: Vocabulary::new(&config.vocabulary),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<usize>> {
        self.vocabulary.tokenize(text)
    }

    /// Text tokens, geometry tokens with the timestep token appended, and
    /// the text padding mask.
    pub fn encode_conditions(&self, inputs: &[ConditionInput], t: &[usize]) -> Result<Conditions> {
        if inputs.len() != t.len() {
            return Err(ChainError::Shape(format!("{} conditions for {} timesteps", inputs.len(), t.len())));
        }
        let steps = self.config.diffusion_steps;
        if let Some(&bad) = t.iter().find(|&&t| t >= steps) {
            return Err(ChainError::Timestep { t: bad, steps });
        }
        let dt = self.config.d_t;
        let ids: Vec<Vec<usize>> = inputs.iter().map(|c| c.text.clone()).collect();
        let (text, text_mask) = self.text.encode_batch(&ids)?;
        let tf: Vec<f64> = t.iter().map(|&v| v as f64).collect();
        let temb = self.timestep.forward(&sinusoidal(&tf, dt))?;
        let mut geo = Vec::with_capacity(inputs.len());
        for (k, c) in inputs.iter().enumerate() {
            let g = self.points.forward(&c.points)?;
            geo.push(Tensor::concat(&[g, temb.narrow(0, k, 1)?], 0)?);
        }
        Ok(Conditions { geometry: Tensor::stack(&geo)?, text, text_mask })
    }

    /// `x`: `[B, L, J+2, 12]` → `m̂_0` of the same shape.
    pub fn forward_encoded(&self, x: &Tensor, cond: &Conditions) -> Result<Tensor> {
        let n = self.config.nodes();
        if x.ndim() != 4 || x.dim(2) != n || x.dim(3) != D_IN {
            return Err(ChainError::Shape(format!("model input {:?}, expected [B, L, {}, {}]", x.shape(), n, D_IN)));
        }
        let mut z = self.input.forward(x)?;
        for block in &self.blocks {
            z = block.forward(&z, cond)?;
        }
        Ok(self.output.forward(&z)?)
    }

    pub fn forward(&self, x: &Tensor, t: &[usize], inputs: &[ConditionInput]) -> Result<Tensor> {
        if x.ndim() != 4 || x.dim(0) != inputs.len() {
            return Err(ChainError::Shape(format!("model input {:?} for {} conditions", x.shape(), inputs.len())));
        }
        let cond = self.encode_conditions(inputs, t)?;
        self.forward_encoded(x, &cond)
    }
}

/// Wraps a model and one condition as a [`crate::diffusion::Denoiser`] for a
/// single `[L, J+2, 12]` sequence.
pub struct ModelDenoiser<'a> {
    pub model: &'a ChainHoi,
    pub condition: ConditionInput,
    pub len: usize,
}

impl crate::diffusion::Denoiser for ModelDenoiser<'_> {
    fn predict(&self, x_t: &[f64], t: usize, conditional: bool) -> Result<Vec<f64>> {
        let n = self.model.config.nodes();
        let x = Tensor::from_vec(x_t.to_vec(), &[1, self.len, n, D_IN])?;
        let cond = if conditional {
            self.condition.clone()
        } else {
            ConditionInput { text: Vec::new(), points: self.condition.points.clone() }
        };
        Ok(self.model.forward(&x, &[t], &[cond])?.to_vec())
    }
}
