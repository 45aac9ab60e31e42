use crate::module::Module;
use crate::tensor::{Gradients, Tensor};

/// AdamW with decoupled weight decay (decay applied to the weights before the
/// adaptive step).
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW::new(1e-4)
    }
}

impl AdamW {
    pub fn new(lr: f64) -> AdamW {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> AdamW {
        self.weight_decay = wd;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Moment buffers in parameter order, for checkpointing.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.first, &self.second)
    }

    pub fn restore(&mut self, step: u64, first: Vec<Vec<f64>>, second: Vec<Vec<f64>>) {
        self.step = step;
        self.first = first;
        self.second = second;
    }

    /// Updates every parameter of `module` that received a gradient.
    pub fn step<M: Module + ?Sized>(&mut self, module: &mut M, grads: &Gradients) {
        let mut params: Vec<&mut Tensor> = module.named_params_mut().into_iter().map(|(_, t)| t).collect();
        self.step_tensors(&mut params, grads);
    }

    pub fn step_tensors(&mut self, params: &mut [&mut Tensor], grads: &Gradients) {
        if self.first.len() != params.len() {
            self.first = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads.get_or_zeros(p);
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            let mut data = p.to_vec();
            for j in 0..data.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                data[j] *= 1.0 - self.lr * self.weight_decay;
                data[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            **p = Tensor::param(data, p.shape()).expect("shape preserved");
        }
    }
}
