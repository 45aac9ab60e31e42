//! Forward noising, deterministic DDIM sampling and classifier-free guidance.
//! The denoiser predicts the clean sample `m̂_0`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ChainError, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;
pub const DEFAULT_DDIM_STEPS: usize = 50;
pub const DEFAULT_GUIDANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    pub betas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        DiffusionSchedule::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
    }
}

impl DiffusionSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> DiffusionSchedule {
        let betas: Vec<f64> = (0..steps)
            .map(|t| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * t as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bars.push(acc);
        }
        DiffusionSchedule { betas, alpha_bars }
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t >= self.steps() {
            return Err(ChainError::Timestep { t, steps: self.steps() });
        }
        Ok(())
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.alpha_bars[t])
    }

    /// `√ᾱ_t m_0 + √(1−ᾱ_t) noise`.
    pub fn q_sample(&self, m0: &[f64], t: usize, noise: &[f64]) -> Result<Vec<f64>> {
        self.check(t)?;
        if m0.len() != noise.len() {
            return Err(ChainError::Shape(format!("m_0 has {} values, noise {}", m0.len(), noise.len())));
        }
        let ab = self.alpha_bars[t];
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(m0.iter().zip(noise).map(|(x, n)| a * x + b * n).collect())
    }

    /// One η = 0 DDIM update from `t` to `prev`. `prev = None` is the
    /// terminal step past `t = 0`, where ᾱ is taken as 1 and the result is
    /// exactly `m̂_0`.
    pub fn ddim_step(&self, x_t: &[f64], x0: &[f64], t: usize, prev: Option<usize>) -> Result<Vec<f64>> {
        self.check(t)?;
        if x_t.len() != x0.len() {
            return Err(ChainError::Shape(format!("x_t has {} values, x0 {}", x_t.len(), x0.len())));
        }
        let ab_prev = match prev {
            Some(p) if p >= t => return Err(ChainError::StepOrder { t, prev: p }),
            Some(p) => self.alpha_bars[p],
            None => return Ok(x0.to_vec()),
        };
        let ab = self.alpha_bars[t];
        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
        let (pa, pb) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
        Ok(x_t
            .iter()
            .zip(x0)
            .map(|(&x, &m)| {
                let eps = (x - sa * m) / sb;
                pa * m + pb * eps
            })
            .collect())
    }

    /// `count` evenly spaced timesteps from `T − 1` down to 0.
    pub fn ddim_plan(&self, count: usize) -> Vec<usize> {
        let last = (self.steps() - 1) as f64;
        if count <= 1 {
            return vec![self.steps() - 1];
        }
        let mut plan: Vec<usize> =
            (0..count).map(|k| (last - k as f64 * last / (count - 1) as f64).round() as usize).collect();
        plan.dedup();
        plan
    }
}

pub fn cfg_combine(cond: &[f64], uncond: &[f64], w: f64) -> Result<Vec<f64>> {
    if cond.len() != uncond.len() {
        return Err(ChainError::Shape(format!("guidance inputs {} vs {}", cond.len(), uncond.len())));
    }
    Ok(cond.iter().zip(uncond).map(|(c, u)| u + w * (c - u)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    pub scale: f64,
    pub enabled: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig { scale: DEFAULT_GUIDANCE, enabled: true }
    }
}

/// Anything that maps a noisy sample at step `t` to a clean-sample estimate.
pub trait Denoiser {
    fn predict(&self, x_t: &[f64], t: usize, conditional: bool) -> Result<Vec<f64>>;
}

pub fn standard_normal<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Runs the DDIM chain from pure noise at `T − 1`.
pub fn sample<D: Denoiser + ?Sized, R: Rng>(
    denoiser: &D,
    numel: usize,
    schedule: &DiffusionSchedule,
    ddim_steps: usize,
    guidance: GuidanceConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let plan = schedule.ddim_plan(ddim_steps);
    let mut x = standard_normal(rng, numel);
    for (k, &t) in plan.iter().enumerate() {
        let cond = denoiser.predict(&x, t, true)?;
        let x0 = if guidance.enabled && guidance.scale != 1.0 {
            let uncond = denoiser.predict(&x, t, false)?;
            cfg_combine(&cond, &uncond, guidance.scale)?
        } else {
            cond
        };
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(ChainError::InvalidFeatures(format!("non-finite prediction at t = {}", t)));
        }
        x = schedule.ddim_step(&x, &x0, t, plan.get(k + 1).copied())?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_and_monotone() {
        let s = DiffusionSchedule::default();
        assert_eq!(s.steps(), 1000);
        assert_eq!(s.betas[0], 1e-4);
        assert!((s.betas[999] - 0.02).abs() < 1e-15);
        assert!(s.alpha_bars.windows(2).all(|w| w[1] < w[0]));
        assert!(s.alpha_bars.iter().all(|&a| a > 0.0 && a < 1.0));
    }

    #[test]
    fn zero_noise_scales_only() {
        let s = DiffusionSchedule::default();
        let m = vec![1.0, -2.0, 0.5];
        let x = s.q_sample(&m, 300, &[0.0; 3]).unwrap();
        let a = s.alpha_bars[300].sqrt();
        for (xi, mi) in x.iter().zip(&m) {
            assert_eq!(*xi, a * mi);
        }
        assert!(matches!(s.q_sample(&m, 1000, &[0.0; 3]), Err(ChainError::Timestep { .. })));
    }

    #[test]
    fn early_step_is_close_to_clean() {
        let s = DiffusionSchedule::default();
        let m = vec![1.0, -1.0, 0.7];
        let x = s.q_sample(&m, 0, &[1.0, -1.0, 1.0]).unwrap();
        for (xi, mi) in x.iter().zip(&m) {
            assert!((xi - mi).abs() <= 0.015);
        }
    }

    #[test]
    fn plan_is_fifty_distinct_steps() {
        let s = DiffusionSchedule::default();
        let p = s.ddim_plan(50);
        assert_eq!(p.len(), 50);
        assert_eq!((p[0], p[49]), (999, 0));
        assert!(p.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn ddim_recovers_q_sample_with_true_x0() {
        let s = DiffusionSchedule::default();
        let m0 = vec![0.3, -1.2, 2.0, 0.0];
        let noise = vec![0.5, 1.5, -0.7, 0.1];
        let xt = s.q_sample(&m0, 700, &noise).unwrap();
        let got = s.ddim_step(&xt, &m0, 700, Some(250)).unwrap();
        let want = s.q_sample(&m0, 250, &noise).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
        assert_eq!(s.ddim_step(&xt, &m0, 700, None).unwrap(), m0);
        assert!(matches!(s.ddim_step(&xt, &m0, 7, Some(7)), Err(ChainError::StepOrder { .. })));
    }

    #[test]
    fn guidance_formula() {
        let c = [1.0, 2.0];
        let u = [0.5, -1.0];
        assert_eq!(cfg_combine(&c, &u, 1.0).unwrap(), c.to_vec());
        assert_eq!(cfg_combine(&c, &u, 0.0).unwrap(), u.to_vec());
        assert_eq!(cfg_combine(&c, &u, 2.0).unwrap(), vec![1.5, 5.0]);
        assert!(cfg_combine(&c, &[1.0], 2.0).is_err());
    }
}
