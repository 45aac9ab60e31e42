use serde::{Deserialize, Serialize};

use crate::error::{ChainError, Result};
use crate::graph::CHAIN_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub blocks: usize,
    pub d_m: usize,
    pub d_t: usize,
    pub heads: usize,
    pub joints: usize,
    pub object_point_tokens: usize,
    pub point_hidden: usize,
    /// Feed-forward hidden width as a multiple of the layer width.
    pub ffn_mult: usize,
    pub text_layers: usize,
    pub diffusion_steps: usize,
    /// Probability of replacing the text with the null token in training.
    pub cond_drop: f64,
    pub use_scm: bool,
    pub use_kim: bool,
    pub kim_mask: bool,
    /// Connect the object node to every joint instead of the eight
    /// interaction joints.
    pub object_to_all_joints: bool,
    pub vocabulary: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            blocks: 6,
            d_m: 64,
            d_t: 256,
            heads: 4,
            joints: 22,
            object_point_tokens: 16,
            point_hidden: 64,
            ffn_mult: 2,
            text_layers: 2,
            diffusion_steps: 1000,
            cond_drop: 0.1,
            use_scm: true,
            use_kim: true,
            kim_mask: true,
            object_to_all_joints: false,
            vocabulary: Vec::new(),
        }
    }
}

fn linear(a: usize, b: usize) -> usize {
    a * b + b
}

fn attention(d: usize) -> usize {
    4 * linear(d, d)
}

fn ffn(d: usize, h: usize) -> usize {
    linear(d, h) + linear(h, d)
}

impl ModelConfig {
    /// Small configuration used by tests and the desk runs.
    pub fn desk() -> ModelConfig {
        ModelConfig { blocks: 2, d_m: 16, d_t: 32, ..ModelConfig::default() }
    }

    pub fn nodes(&self) -> usize {
        self.joints + 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ChainError::Config(m.to_string()));
        if self.blocks == 0 {
            return bad("blocks must be at least 1");
        }
        if self.heads == 0 || self.d_t % self.heads != 0 {
            return bad("d_t must be divisible by heads");
        }
        if self.d_m % 4 != 0 || self.d_m == 0 {
            return bad("d_m must be a positive multiple of 4 (temporal branches)");
        }
        if self.object_point_tokens == 0 {
            return bad("object_point_tokens must be at least 1");
        }
        if !(0.0..1.0).contains(&self.cond_drop) {
            return bad("cond_drop must lie in [0, 1)");
        }
        if self.diffusion_steps == 0 {
            return bad("diffusion_steps must be positive");
        }
        Ok(())
    }

    /// Vocabulary rows: the listed words plus one padding row.
    pub fn vocab_rows(&self) -> usize {
        self.vocabulary.len() + 1
    }

    pub fn decoder_layer_params(&self, d: usize) -> usize {
        3 * 2 * d + 2 * attention(d) + ffn(d, self.ffn_mult * d)
    }

    pub fn encoder_layer_params(&self, d: usize) -> usize {
        2 * 2 * d + attention(d) + ffn(d, self.ffn_mult * d)
    }

    pub fn condition_decoder_params(&self) -> usize {
        2 * self.decoder_layer_params(self.d_t)
    }

    pub fn block_params(&self) -> usize {
        let (dm, dt, n) = (self.d_m, self.d_t, self.nodes());
        let c = dm / 4;
        let gcn = linear(dm, dm);
        let temporal = 4 * linear(dm, c) + 2 * 3 * c * c + 2 * c;
        let scm = if self.use_scm {
            linear(dm, dt) + self.condition_decoder_params() + linear(dt, dm) + linear(2 * dm, dm)
        } else {
            0
        };
        let kim = if self.use_kim {
            CHAIN_COUNT * dt
                + self.condition_decoder_params()
                + linear(dm, dt)
                + self.decoder_layer_params(dt)
                + linear(CHAIN_COUNT * dt, n * dt)
                + linear(2 * dt, dm)
        } else {
            0
        };
        gcn + temporal + scm + kim
    }

    /// Closed-form parameter count of [`super::ChainHoi`].
    pub fn parameter_count(&self) -> usize {
        let dt = self.d_t;
        let text = self.vocab_rows() * dt + dt + self.text_layers * self.encoder_layer_params(dt);
        let points = linear(3, self.point_hidden) + linear(self.point_hidden, dt);
        let timestep = linear(dt, dt);
        let io = linear(crate::repr::D_IN, self.d_m) + linear(self.d_m, crate::repr::D_IN);
        text + points + timestep + io + self.blocks * self.block_params()
    }
}
