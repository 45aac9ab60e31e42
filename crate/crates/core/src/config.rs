//! Run configuration, read from TOML (`key = value` lines grouped in
//! sections). Every field has a default, so an empty file is valid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_DDIM_STEPS, DEFAULT_GUIDANCE, DEFAULT_STEPS};
use crate::error::{ChainError, Result};
use crate::losses::LossWeights;
use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub ddim_steps: usize,
    pub guidance: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            steps: DEFAULT_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            ddim_steps: DEFAULT_DDIM_STEPS,
            guidance: DEFAULT_GUIDANCE,
        }
    }
}

impl DiffusionConfig {
    pub fn schedule(&self) -> DiffusionSchedule {
        DiffusionSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stops early after this many optimizer steps when set.
    pub max_steps: Option<usize>,
    /// Training crop length in frames; sequences shorter than this are
    /// skipped.
    pub window: usize,
    /// Checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 1e-4,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 200,
            max_steps: None,
            window: 64,
            checkpoint_every: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory with `dataset.jsonl`, `groups.json` and `meshes/`.
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Separate model config file; replaces `[model]` when set.
    pub model_path: Option<PathBuf>,
    pub model: ModelConfig,
    pub diffusion: DiffusionConfig,
    pub loss: LossWeights,
    pub optim: OptimConfig,
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model_path: None,
            model: ModelConfig::default(),
            diffusion: DiffusionConfig::default(),
            loss: LossWeights::default(),
            optim: OptimConfig::default(),
            data: DataConfig::default(),
        }
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
        ChainError::Parse { path: origin.to_string(), line, msg: e.message().to_string() }
    })
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
        let cfg: RunConfig = parse_toml(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `model_path` resolves against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = parse_toml(&text, &path.display().to_string())?;
        if let Some(mp) = &cfg.model_path {
            let mp = path.parent().map(|d| d.join(mp)).unwrap_or_else(|| mp.clone());
            cfg.model = load_model_config(&mp)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ChainError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |m: String| Err(ChainError::Config(m));
        let d = &self.diffusion;
        if d.steps != self.model.diffusion_steps {
            return bad(format!(
                "diffusion.steps = {} but model.diffusion_steps = {}",
                d.steps, self.model.diffusion_steps
            ));
        }
        if !(0.0 < d.beta_start && d.beta_start <= d.beta_end && d.beta_end < 1.0) {
            return bad(format!("beta range {}..{} must satisfy 0 < start <= end < 1", d.beta_start, d.beta_end));
        }
        if d.ddim_steps == 0 || d.ddim_steps > d.steps {
            return bad(format!("ddim_steps = {} must be in 1..={}", d.ddim_steps, d.steps));
        }
        if !(d.guidance.is_finite() && d.guidance >= 0.0) {
            return bad(format!("guidance = {}", d.guidance));
        }
        if !(self.loss.lambda_h >= 0.0 && self.loss.lambda_o >= 0.0) {
            return bad(format!("loss weights must be nonnegative, got {:?}", self.loss));
        }
        let o = &self.optim;
        if !(o.lr > 0.0 && o.lr.is_finite()) || o.weight_decay < 0.0 {
            return bad(format!("lr = {}, weight_decay = {}", o.lr, o.weight_decay));
        }
        if o.batch_size == 0 || o.window < 2 {
            return bad(format!("batch_size = {}, window = {}", o.batch_size, o.window));
        }
        Ok(())
    }
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ModelConfig = parse_toml(&text, &path.display().to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("", "x").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.model = ModelConfig::desk();
        cfg.optim.max_steps = Some(7);
        cfg.seed = 99;
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text, "x").unwrap(), cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "seed = 1\n[optim]\nlr = 0.1\nbogus = 3\n";
        match RunConfig::parse(text, "run.toml") {
            Err(ChainError::Parse { path, line, .. }) => {
                assert_eq!(path, "run.toml");
                assert_eq!(line, 4);
            }
            other => panic!("{:?}", other),
        }
        assert!(matches!(RunConfig::parse("[diffusion]\nsteps = 10\n", "x"), Err(ChainError::Config(_))));
    }
}
