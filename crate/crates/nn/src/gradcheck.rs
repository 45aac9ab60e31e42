//! Central-difference gradient checking.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;
/// Denominator floor for the relative error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub probes: Vec<Probe>,
}

impl Report {
    pub fn max_rel_error(&self) -> f64 {
        self.probes.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Checks `f` (which must return a single-element tensor) against central
/// differences. At most `per_input` coordinates of each input are probed.
pub fn check<F, R>(f: F, inputs: &[Tensor], per_input: usize, eps: f64, rng: &mut R) -> Result<Report>
where
    F: Fn(&[Tensor]) -> Result<Tensor>,
    R: Rng,
{
    let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detach().requires_grad_leaf()).collect();
    let out = f(&leaves)?;
    if out.numel() != 1 {
        return Err(NnError::Shape(format!("gradcheck needs a scalar output, got {:?}", out.shape())));
    }
    let grads = out.backward()?;
    let eval = |xs: &[Tensor]| -> Result<f64> { Ok(f(xs)?.item()) };

    let mut report = Report::default();
    for (k, leaf) in leaves.iter().enumerate() {
        let g = grads.get_or_zeros(leaf);
        let n = leaf.numel();
        let picks: Vec<usize> = if n <= per_input { (0..n).collect() } else { sample(rng, n, per_input).into_vec() };
        for idx in picks {
            let mut shifted: Vec<Tensor> = leaves.iter().map(|t| t.detach()).collect();
            let mut plus = leaf.to_vec();
            plus[idx] += eps;
            shifted[k] = Tensor::from_vec(plus, leaf.shape())?;
            let fp = eval(&shifted)?;
            let mut minus = leaf.to_vec();
            minus[idx] -= eps;
            shifted[k] = Tensor::from_vec(minus, leaf.shape())?;
            let fm = eval(&shifted)?;
            let numeric = (fp - fm) / (2.0 * eps);
            report.probes.push(Probe {
                input: k,
                index: idx,
                analytic: g[idx],
                numeric,
                rel_error: rel_error(g[idx], numeric),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn product_of_two_inputs_passes() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = Tensor::from_vec(vec![0.3, -1.2, 2.0], &[3]).unwrap();
        let b = Tensor::from_vec(vec![1.1, 0.4, -0.7], &[3]).unwrap();
        let r = check(|x| Ok(x[0].mul(&x[1])?.tanh().sum_all()), &[a, b], 10, DEFAULT_EPS, &mut rng).unwrap();
        assert_eq!(r.probes.len(), 6);
        assert!(r.max_rel_error() < 1e-6, "{:?}", r.worst());
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut rng = StdRng::seed_from_u64(3);
        let x = Tensor::from_vec(vec![0.5, 1.5], &[2]).unwrap();
        // value is sum(x^2) but the custom backward claims 3x
        let r = check(
            |xs| {
                let x = xs[0].clone();
                let v: f64 = x.data().iter().map(|v| v * v).sum();
                let xc = x.clone();
                Tensor::custom(vec![v], &[1], vec![x], move |g| vec![Some(xc.data().iter().map(|v| 3.0 * v * g[0]).collect())])
            },
            &[x],
            2,
            DEFAULT_EPS,
            &mut rng,
        )
        .unwrap();
        assert!(r.max_rel_error() > 0.3);
    }

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(0.0, 0.0), 0.0);
        assert!((rel_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
    }
}
