//! Text- and object-conditioned generation with a trained model.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{sample, DiffusionSchedule, GuidanceConfig};
use crate::error::{ChainError, Result};
use crate::geometry::TriangleMesh;
use crate::model::{ChainHoi, ConditionInput, ModelDenoiser};
use crate::repr::{HoiSequence, D_IN};

#[derive(Debug, Clone)]
pub struct SampleRequest {
    pub text: String,
    pub mesh: Arc<TriangleMesh>,
    pub frames: usize,
    pub ddim_steps: usize,
    pub guidance: GuidanceConfig,
    pub seed: u64,
    pub fps: f64,
}

/// Runs the DDIM chain for one request. The same request always yields the
/// same bits.
pub fn sample_sequence(model: &ChainHoi, schedule: &DiffusionSchedule, req: &SampleRequest) -> Result<HoiSequence> {
    if req.frames < 2 {
        return Err(ChainError::TooShort(req.frames));
    }
    let nodes = model.config().nodes();
    let denoiser = ModelDenoiser {
        model,
        condition: ConditionInput { text: model.tokenize(&req.text)?, points: Arc::new(req.mesh.surface_points()) },
        len: req.frames,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let x = sample(&denoiser, req.frames * nodes * D_IN, schedule, req.ddim_steps, req.guidance, &mut rng)?;
    let mut seq = HoiSequence::new(x, req.frames, nodes, req.fps)?;
    snap_foot_contacts(&mut seq, model.config().joints);
    Ok(seq)
}

/// Rounds the foot-contact flags of a raw prediction to 0/1 and clears the
/// padding channels, the form every stored sequence uses.
pub fn snap_foot_contacts(seq: &mut HoiSequence, node: usize) {
    for i in 0..seq.len {
        let f = seq.node_mut(i, node);
        for c in f[..4].iter_mut() {
            *c = if *c > 0.5 { 1.0 } else { 0.0 };
        }
        f[4..].fill(0.0);
    }
}
