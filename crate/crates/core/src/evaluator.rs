//! Toy contrastive evaluator for FID and R-Precision: a motion branch (frame
//! projection, CLS token, transformer encoder) and a text branch (stub text
//! encoder with CLS), trained with symmetric InfoNCE.

use chainhoi_nn::checkpoint::{self, Entry};
use chainhoi_nn::module::join;
use chainhoi_nn::{sinusoidal, AdamW, Linear, Module, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChainError, Result};
use crate::model::{EncoderLayer, TextEncoder, Vocabulary};
use crate::repr::HoiSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorConfig {
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub projection: usize,
    pub temperature: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    /// Fraction of steps during which the text branch stays frozen.
    pub text_warmup: f64,
    pub vocabulary: Vec<String>,
    /// Per-frame input width, `(J+2) · 12`.
    pub frame_width: usize,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            width: 32,
            layers: 2,
            heads: 4,
            projection: 32,
            temperature: 0.1,
            lr: 2e-3,
            steps: 300,
            batch_size: 32,
            text_warmup: 0.05,
            vocabulary: Vec::new(),
            frame_width: 24 * 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MotionBranch {
    pub frame: Linear,
    pub cls: Tensor,
    pub layers: Vec<EncoderLayer>,
    pub proj: Linear,
}

chainhoi_nn::impl_module!(MotionBranch { params: [cls], children: [frame, layers, proj] });

#[derive(Debug, Clone)]
pub struct TextBranch {
    pub encoder: TextEncoder,
    pub proj: Linear,
}

chainhoi_nn::impl_module!(TextBranch { params: [], children: [encoder, proj] });

#[derive(Debug, Clone)]
pub struct Evaluator {
    pub motion: MotionBranch,
    pub text: TextBranch,
    pub config: EvaluatorConfig,
    vocabulary: Vocabulary,
}

impl Module for Evaluator {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.motion.visit(&join(prefix, "motion"), out);
        self.text.visit(&join(prefix, "text"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.motion.visit_mut(&join(prefix, "motion"), out);
        self.text.visit_mut(&join(prefix, "text"), out);
    }
}

/// Unit-normalizes each row of `[B, d]`.
fn normalize_rows(x: &Tensor) -> Result<Tensor> {
    let norm = x.square().sum_axis(1, true)?.add_scalar(1e-12).sqrt();
    Ok(x.div(&norm)?)
}

fn l2_rows(x: &Tensor) -> Vec<Vec<f64>> {
    let d = x.dim(1);
    x.data()
        .chunks(d)
        .map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            r.iter().map(|v| v / n).collect()
        })
        .collect()
}

impl Evaluator {
    pub fn new<R: Rng>(config: &EvaluatorConfig, rng: &mut R) -> Result<Evaluator> {
        let w = config.width;
        let vocabulary = Vocabulary::new(&config.vocabulary);
        let motion = MotionBranch {
            frame: Linear::new(config.frame_width, w, rng),
            cls: Tensor::param((0..w).map(|_| rng.gen_range(-1.0..1.0)).collect(), &[1, w])?,
            layers: (0..config.layers)
                .map(|_| EncoderLayer::new(w, config.heads, 2 * w, rng))
                .collect::<chainhoi_nn::Result<_>>()?,
            proj: Linear::new(w, config.projection, rng),
        };
        let text = TextBranch {
            encoder: TextEncoder::new(vocabulary.len() + 1, w, config.heads, config.layers, 2 * w, true, rng)?,
            proj: Linear::new(w, config.projection, rng),
        };
        Ok(Evaluator { motion, text, config: config.clone(), vocabulary })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Projected CLS embeddings `[B, projection]` for equally long sequences.
    pub fn motion_embed(&self, seqs: &[&HoiSequence]) -> Result<Tensor> {
        let Some(first) = seqs.first() else {
            return Err(ChainError::Shape("empty motion batch".into()));
        };
        let (l, fw, w) = (first.len, self.config.frame_width, self.config.width);
        if seqs.iter().any(|s| s.len != l || s.nodes * 12 != fw) {
            return Err(ChainError::Shape(format!("motion batch needs equal lengths and {} values per frame", fw)));
        }
        let b = seqs.len();
        let data: Vec<f64> = seqs.iter().flat_map(|s| s.frames.iter().copied()).collect();
        let frames = self.motion.frame.forward(&Tensor::from_vec(data, &[b, l, fw])?)?;
        let pos: Vec<f64> = (0..l).map(|p| p as f64).collect();
        let frames = frames.add(&sinusoidal(&pos, w))?;
        let cls = self.motion.cls.reshape(&[1, 1, w])?.broadcast_to(&[b, 1, w])?;
        let mut x = Tensor::concat(&[cls, frames], 1)?;
        for layer in &self.motion.layers {
            x = layer.forward(&x, None)?;
        }
        let head = x.narrow(1, 0, 1)?.reshape(&[b, w])?;
        Ok(self.motion.proj.forward(&head)?)
    }

    pub fn text_embed(&self, ids: &[Vec<usize>]) -> Result<Tensor> {
        let (x, _) = self.text.encoder.encode_batch(ids)?;
        let (b, w) = (ids.len(), self.config.width);
        let head = x.narrow(1, 0, 1)?.reshape(&[b, w])?;
        Ok(self.text.proj.forward(&head)?)
    }

    /// Symmetric InfoNCE over a batch of pairs.
    pub fn info_nce(&self, motion: &Tensor, text: &Tensor) -> Result<Tensor> {
        let m = normalize_rows(motion)?;
        let t = normalize_rows(text)?;
        let logits = m.matmul(&t.transpose_last()?)?.scale(1.0 / self.config.temperature);
        let b = logits.dim(0);
        let eye: Vec<f64> = (0..b * b).map(|k| if k / b == k % b { 1.0 } else { 0.0 }).collect();
        let eye = Tensor::from_vec(eye, &[b, b])?;
        let ce = |l: &Tensor| -> Result<Tensor> {
            let lp = l.log_softmax_last()?;
            Ok(lp.mul(&eye)?.sum_all().scale(-1.0 / b as f64))
        };
        Ok(ce(&logits)?.add(&ce(&logits.transpose_last()?)?)?.scale(0.5))
    }

    /// Unit-normalized motion features, one row per sequence.
    pub fn motion_features(&self, seqs: &[&HoiSequence]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(64) {
            out.extend(l2_rows(&self.motion_embed(chunk)?));
        }
        Ok(out)
    }

    pub fn text_features(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let ids = texts.iter().map(|t| self.vocabulary.tokenize(t)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(ids.len());
        for chunk in ids.chunks(64) {
            out.extend(l2_rows(&self.text_embed(chunk)?));
        }
        Ok(out)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        checkpoint::save(path, &checkpoint::module_entries(self, "evaluator"))?;
        let meta = crate::train::meta_path(path);
        std::fs::write(meta, serde_json::to_string_pretty(&self.config)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Evaluator> {
        let config: EvaluatorConfig = serde_json::from_str(&std::fs::read_to_string(crate::train::meta_path(path))?)?;
        let mut ev = Evaluator::new(&config, &mut ChaCha8Rng::seed_from_u64(0))?;
        let entries: Vec<Entry> = checkpoint::load(path)?;
        checkpoint::load_into(&mut ev, &entries, "evaluator")?;
        Ok(ev)
    }
}

/// Paired training data for the evaluator: windows of equal length.
pub struct EvaluatorData<'a> {
    pub motions: Vec<&'a HoiSequence>,
    pub texts: Vec<&'a str>,
}

/// Trains an evaluator. The vocabulary comes from the config or, when empty,
/// from the training texts. The text branch is frozen for the first
/// `text_warmup` fraction of steps.
pub fn train_evaluator(config: &EvaluatorConfig, data: &EvaluatorData, seed: u64) -> Result<(Evaluator, Vec<f64>)> {
    let n = data.motions.len();
    if n < 2 || data.texts.len() != n {
        return Err(ChainError::Dataset(format!("evaluator needs at least 2 pairs, got {} motions and {} texts", n, data.texts.len())));
    }
    let mut config = config.clone();
    if config.vocabulary.is_empty() {
        config.vocabulary = Vocabulary::from_texts(data.texts.iter().copied()).words().to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ev = Evaluator::new(&config, &mut rng)?;
    let ids = data.texts.iter().map(|t| ev.vocabulary.tokenize(t)).collect::<Result<Vec<_>>>()?;
    let mut motion_opt = AdamW::new(config.lr);
    let mut text_opt = AdamW::new(config.lr);
    let warmup = (config.steps as f64 * config.text_warmup).ceil() as usize;
    let bs = config.batch_size.min(n).max(2);
    let mut losses = Vec::with_capacity(config.steps);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    for step in 0..config.steps {
        let mut pick = Vec::with_capacity(bs);
        while pick.len() < bs {
            if cursor == n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            pick.push(order[cursor]);
            cursor += 1;
        }
        let motions: Vec<&HoiSequence> = pick.iter().map(|&i| data.motions[i]).collect();
        let batch_ids: Vec<Vec<usize>> = pick.iter().map(|&i| ids[i].clone()).collect();
        let loss = ev.info_nce(&ev.motion_embed(&motions)?, &ev.text_embed(&batch_ids)?)?;
        let grads = loss.backward()?;
        motion_opt.step(&mut ev.motion, &grads);
        if step >= warmup {
            text_opt.step(&mut ev.text, &grads);
        }
        losses.push(loss.item());
    }
    Ok((ev, losses))
}
