//! Training loop for the denoiser: batches of cropped windows, the weighted
//! objective, AdamW, checkpoints that capture optimizer state, and a loss
//! curve per epoch.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chainhoi_nn::checkpoint::{self, Entry};
use chainhoi_nn::{AdamW, Module, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::io::{loss_csv, Dataset, LossRow};
use crate::diffusion::{standard_normal, DiffusionSchedule};
use crate::error::{ChainError, Result};
use crate::geometry::TriangleMesh;
use crate::losses::{total_loss, ContactTarget, LossBreakdown};
use crate::model::{ChainHoi, ConditionInput, ModelConfig, Vocabulary};
use crate::repr::{decode_sequence, encode_sequence, ContactLabels, DecodedMotion, GlobalMotion, D_IN};
use crate::skeleton::{SkeletonSpec, Vec3};

/// A training sequence, decoded once so windows can be re-encoded relative
/// to their own first frame.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub text: Vec<usize>,
    pub points: Arc<Vec<Vec3>>,
    pub mesh: Arc<TriangleMesh>,
    pub motion: DecodedMotion,
    pub labels: ContactLabels,
    pub fps: f64,
}

impl Example {
    pub fn len(&self) -> usize {
        self.motion.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motion.positions.is_empty()
    }

    /// Features and contact target of frames `start .. start + len`.
    pub fn window(&self, start: usize, len: usize, spec: &SkeletonSpec) -> Result<(Vec<f64>, ContactTarget)> {
        let end = start + len;
        if end > self.len() {
            return Err(ChainError::Shape(format!("window {}..{} of a {}-frame sequence", start, end, self.len())));
        }
        let m = &self.motion;
        let motion = GlobalMotion { positions: m.positions[start..end].to_vec(), rotations: m.rotations[start..end].to_vec() };
        let objects = m.objects[start..end].to_vec();
        let seq = encode_sequence(&motion, &objects, spec, self.fps)?;
        let labels = ContactLabels { a: self.labels.a[start..end].to_vec(), threshold: self.labels.threshold };
        Ok((seq.frames, ContactTarget { labels, mesh: self.mesh.clone(), poses: objects }))
    }
}

/// Tokenizes texts and decodes every record of `dataset` that has at least
/// `window` frames.
pub fn prepare_examples(dataset: &Dataset, vocab: &Vocabulary, window: usize, spec: &SkeletonSpec) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for r in &dataset.records {
        let seq = r.sequence()?;
        seq.validate(spec)?;
        if seq.len < window {
            log::warn!("skipping {}: {} frames is shorter than the {}-frame window", r.id, seq.len, window);
            continue;
        }
        let mesh = dataset.mesh(&r.object_id)?.clone();
        out.push(Example {
            id: r.id.clone(),
            text: vocab.tokenize(&r.text)?,
            points: Arc::new(mesh.surface_points()),
            mesh,
            motion: decode_sequence(&seq, spec)?,
            labels: r.labels()?,
            fps: seq.fps,
        });
    }
    if out.is_empty() {
        return Err(ChainError::Dataset(format!("no sequence has at least {} frames", window)));
    }
    Ok(out)
}

/// Inputs of one optimizer step.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `[B, L, J+2, 12]`.
    pub x0: Tensor,
    pub x_t: Tensor,
    pub t: Vec<usize>,
    pub conditions: Vec<ConditionInput>,
    pub contacts: Vec<ContactTarget>,
}

/// Checkpoint sidecar: everything needed to rebuild the model and resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub step: u64,
    pub epoch: usize,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Rebuilds a model from a checkpoint and its sidecar.
pub fn load_model(path: &Path) -> Result<(ChainHoi, CheckpointMeta)> {
    let meta: CheckpointMeta = serde_json::from_str(&std::fs::read_to_string(meta_path(path))?)?;
    let entries = checkpoint::load(path)?;
    let mut model = ChainHoi::new(&meta.model, &mut ChaCha8Rng::seed_from_u64(0))?;
    checkpoint::load_into(&mut model, &entries, "model")?;
    Ok((model, meta))
}

fn step_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const EPOCH_STREAM: u64 = 1 << 62;

pub struct Trainer {
    pub model: ChainHoi,
    pub config: RunConfig,
    pub examples: Vec<Example>,
    pub spec: SkeletonSpec,
    schedule: DiffusionSchedule,
    optimizer: AdamW,
    step: u64,
}

impl Trainer {
    /// Builds the model (with a vocabulary from the dataset texts when the
    /// config has none) and prepares the examples.
    pub fn new(config: &RunConfig, dataset: &Dataset) -> Result<Trainer> {
        config.validate()?;
        let spec = SkeletonSpec::default();
        let mut mc = config.model.clone();
        if mc.vocabulary.is_empty() {
            mc.vocabulary = Vocabulary::from_texts(dataset.texts()).words().to_vec();
        }
        let model = ChainHoi::new(&mc, &mut step_rng(config.seed, u64::MAX))?;
        let examples = prepare_examples(dataset, model.vocabulary(), config.optim.window, &spec)?;
        let mut config = config.clone();
        config.model = mc;
        Ok(Trainer {
            model,
            schedule: config.diffusion.schedule(),
            optimizer: AdamW::new(config.optim.lr).with_weight_decay(config.optim.weight_decay),
            config,
            examples,
            spec,
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.examples.len().div_ceil(self.config.optim.batch_size)
    }

    /// Example indices for a step: consecutive slices of a per-epoch
    /// permutation.
    fn batch_indices(&self, step: u64) -> Vec<usize> {
        let per = self.steps_per_epoch() as u64;
        let (epoch, slot) = ((step / per), (step % per) as usize);
        let mut order: Vec<usize> = (0..self.examples.len()).collect();
        order.shuffle(&mut step_rng(self.config.seed, EPOCH_STREAM + epoch));
        let bs = self.config.optim.batch_size;
        order[slot * bs..((slot + 1) * bs).min(order.len())].to_vec()
    }

    /// Draws windows, timesteps, noise and condition dropout for `step`;
    /// depends only on the seed and the step number.
    pub fn sample_batch(&self, step: u64) -> Result<Batch> {
        let mut rng = step_rng(self.config.seed, step);
        let indices = self.batch_indices(step);
        let window = self.config.optim.window;
        self.make_batch(&indices, window, &mut rng, self.config.model.cond_drop)
    }

    fn make_batch(&self, indices: &[usize], window: usize, rng: &mut ChaCha8Rng, cond_drop: f64) -> Result<Batch> {
        let n = self.spec.node_count();
        let mut x0 = Vec::new();
        let mut xt = Vec::new();
        let mut t = Vec::new();
        let mut conditions = Vec::new();
        let mut contacts = Vec::new();
        for &i in indices {
            let ex = &self.examples[i];
            let start = rng.gen_range(0..=ex.len() - window);
            let (frames, target) = ex.window(start, window, &self.spec)?;
            let step = rng.gen_range(0..self.schedule.steps());
            let noise = standard_normal(rng, frames.len());
            xt.extend(self.schedule.q_sample(&frames, step, &noise)?);
            x0.extend(frames);
            t.push(step);
            let drop = rng.gen::<f64>() < cond_drop;
            conditions.push(ConditionInput { text: if drop { Vec::new() } else { ex.text.clone() }, points: ex.points.clone() });
            contacts.push(target);
        }
        let shape = [indices.len(), window, n, D_IN];
        Ok(Batch { x0: Tensor::from_vec(x0, &shape)?, x_t: Tensor::from_vec(xt, &shape)?, t, conditions, contacts })
    }

    pub fn loss(&self, batch: &Batch) -> Result<LossBreakdown> {
        let pred = self.model.forward(&batch.x_t, &batch.t, &batch.conditions)?;
        total_loss(&pred, &batch.x0, &batch.contacts, &self.spec, self.config.loss)
    }

    /// Applies one AdamW update from a finished backward pass.
    pub fn apply(&mut self, loss: &Tensor) -> Result<()> {
        let grads = loss.backward()?;
        self.optimizer.step(&mut self.model, &grads);
        self.step += 1;
        Ok(())
    }

    pub fn train_step(&mut self) -> Result<LossBreakdown> {
        let batch = self.sample_batch(self.step)?;
        let parts = self.loss(&batch)?;
        if !parts.total.item().is_finite() {
            return Err(ChainError::InvalidFeatures(format!("non-finite loss at step {}", self.step)));
        }
        self.apply(&parts.total)?;
        Ok(parts)
    }

    /// Loss on every example at fixed windows (the busiest contact window),
    /// with timesteps and noise drawn from `seed` and no condition dropout.
    pub fn evaluate(&self, seed: u64) -> Result<LossBreakdown> {
        let mut rng = step_rng(seed, u64::MAX - 1);
        let window = self.config.optim.window;
        let mut x0 = Vec::new();
        let mut xt = Vec::new();
        let mut t = Vec::new();
        let mut conditions = Vec::new();
        let mut contacts = Vec::new();
        for ex in &self.examples {
            let (frames, target) = ex.window(ex.labels.busiest_window(window), window, &self.spec)?;
            let step = rng.gen_range(0..self.schedule.steps());
            let noise = standard_normal(&mut rng, frames.len());
            xt.extend(self.schedule.q_sample(&frames, step, &noise)?);
            x0.extend(frames);
            t.push(step);
            conditions.push(ConditionInput { text: ex.text.clone(), points: ex.points.clone() });
            contacts.push(target);
        }
        let shape = [self.examples.len(), window, self.spec.node_count(), D_IN];
        let batch = Batch { x0: Tensor::from_vec(x0, &shape)?, x_t: Tensor::from_vec(xt, &shape)?, t, conditions, contacts };
        self.loss(&batch)
    }

    pub fn checkpoint_entries(&self) -> Vec<Entry> {
        let mut entries = checkpoint::module_entries(&self.model, "model");
        let (first, second) = self.optimizer.moments();
        for (name, moments) in [("first", first), ("second", second)] {
            for (i, m) in moments.iter().enumerate() {
                entries.push(Entry { name: format!("optim.{}.{}", name, i), shape: vec![m.len()], data: m.clone() });
            }
        }
        entries.push(Entry { name: "optim.step".into(), shape: vec![1], data: vec![self.optimizer.steps_taken() as f64] });
        entries
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.checkpoint_entries())?;
        let meta = CheckpointMeta {
            model: self.config.model.clone(),
            step: self.step,
            epoch: self.step as usize / self.steps_per_epoch(),
        };
        std::fs::write(meta_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    /// Restores parameters, optimizer moments and the step counter.
    pub fn resume(&mut self, path: &Path) -> Result<()> {
        let meta: CheckpointMeta = serde_json::from_str(&std::fs::read_to_string(meta_path(path))?)?;
        if meta.model != self.config.model {
            return Err(ChainError::Config("checkpoint model config differs from the run config".into()));
        }
        let entries = checkpoint::load(path)?;
        checkpoint::load_into(&mut self.model, &entries, "model")?;
        let find = |name: &str| entries.iter().find(|e| e.name == name);
        let count = self.model.named_params().len();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for i in 0..count {
            match (find(&format!("optim.first.{}", i)), find(&format!("optim.second.{}", i))) {
                (Some(a), Some(b)) => {
                    first.push(a.data.clone());
                    second.push(b.data.clone());
                }
                _ if i == 0 => break,
                _ => return Err(ChainError::Config(format!("checkpoint lacks optimizer moments for tensor {}", i))),
            }
        }
        let opt_step = find("optim.step").map(|e| e.data[0] as u64).unwrap_or(0);
        self.optimizer.restore(opt_step, first, second);
        self.step = meta.step;
        Ok(())
    }

    /// Trains to the configured epoch or step limit, writing `loss.csv` and
    /// checkpoints into `out_dir`. Returns one row per finished epoch.
    pub fn run(&mut self, out_dir: &Path) -> Result<Vec<LossRow>> {
        std::fs::create_dir_all(out_dir)?;
        let per = self.steps_per_epoch() as u64;
        let limit = match self.config.optim.max_steps {
            Some(s) => (s as u64).min(self.config.optim.epochs as u64 * per),
            None => self.config.optim.epochs as u64 * per,
        };
        let mut rows = Vec::new();
        let mut acc = [0.0; 4];
        let mut in_epoch = 0usize;
        let every = self.config.optim.checkpoint_every;
        while self.step < limit {
            let parts = self.train_step()?;
            for (a, v) in acc.iter_mut().zip([parts.l_diff, parts.l_h, parts.l_o, parts.total.item()]) {
                *a += v;
            }
            in_epoch += 1;
            if self.step % per == 0 || self.step == limit {
                let epoch = self.step.div_ceil(per) as usize;
                let k = in_epoch as f64;
                let row = LossRow { epoch, l_diff: acc[0] / k, l_h: acc[1] / k, l_o: acc[2] / k, total: acc[3] / k };
                log::info!(
                    "epoch {} step {} total {:.5} diff {:.5} h {:.5} o {:.5}",
                    epoch,
                    self.step,
                    row.total,
                    row.l_diff,
                    row.l_h,
                    row.l_o
                );
                rows.push(row);
                acc = [0.0; 4];
                in_epoch = 0;
                if every > 0 && epoch % every == 0 {
                    self.save_checkpoint(&out_dir.join("checkpoint.bin"))?;
                }
            }
        }
        self.save_checkpoint(&out_dir.join("checkpoint.bin"))?;
        std::fs::write(out_dir.join("loss.csv"), loss_csv(&rows))?;
        Ok(rows)
    }
}
