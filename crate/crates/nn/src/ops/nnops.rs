use rand::Rng;

use crate::error::{shape_err, NnError, Result};
use crate::ops::elementwise::broadcast_index_map;
use crate::ops::linalg::{gemm, gemm_nt, gemm_tn};
use crate::tensor::Tensor;

/// Boolean attention mask, broadcast against logits `[..., n_q, n_k]`.
/// `true` means the key may be attended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    shape: Vec<usize>,
    allow: Vec<bool>,
}

impl Mask {
    pub fn new(allow: Vec<bool>, shape: &[usize]) -> Result<Mask> {
        if allow.len() != shape.iter().product::<usize>() {
            return shape_err(format!("mask length {} vs shape {:?}", allow.len(), shape));
        }
        Ok(Mask { shape: shape.to_vec(), allow })
    }

    pub fn all(n_q: usize, n_k: usize) -> Mask {
        Mask { shape: vec![n_q, n_k], allow: vec![true; n_q * n_k] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn allow(&self) -> &[bool] {
        &self.allow
    }

    fn expand(&self, shape: &[usize]) -> Result<Vec<bool>> {
        if self.shape.len() > shape.len()
            || self
                .shape
                .iter()
                .rev()
                .zip(shape.iter().rev())
                .any(|(&m, &s)| m != 1 && m != s)
        {
            return shape_err(format!("mask {:?} does not broadcast to {:?}", self.shape, shape));
        }
        let map = broadcast_index_map(&self.shape, shape);
        Ok(map.into_iter().map(|j| self.allow[j]).collect())
    }
}

impl Tensor {
    pub fn softmax_last(&self) -> Result<Tensor> {
        self.softmax_impl(None)
    }

    /// Softmax over the last axis with disallowed entries forced to exactly 0.
    /// A row with no allowed entry is an error.
    pub fn masked_softmax_last(&self, mask: &Mask) -> Result<Tensor> {
        self.softmax_impl(Some(mask))
    }

    fn softmax_impl(&self, mask: Option<&Mask>) -> Result<Tensor> {
        if self.ndim() == 0 {
            return shape_err("softmax of a scalar");
        }
        let n = *self.shape().last().unwrap();
        let allow = mask.map(|m| m.expand(self.shape())).transpose()?;
        let x = self.data();
        let mut y = vec![0.0; x.len()];
        for (r, (xr, yr)) in x.chunks(n).zip(y.chunks_mut(n)).enumerate() {
            let ok = |j: usize| allow.as_ref().map_or(true, |a| a[r * n + j]);
            let mut mx = f64::NEG_INFINITY;
            for (j, &v) in xr.iter().enumerate() {
                if ok(j) && v > mx {
                    mx = v;
                }
            }
            if mx == f64::NEG_INFINITY {
                return Err(NnError::Mask(format!("row {} has no allowed key", r)));
            }
            let mut s = 0.0;
            for (j, (&v, o)) in xr.iter().zip(yr.iter_mut()).enumerate() {
                if ok(j) {
                    *o = (v - mx).exp();
                    s += *o;
                }
            }
            yr.iter_mut().for_each(|o| *o /= s);
        }
        let yc = y.clone();
        Ok(Tensor::from_op(
            y,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; g.len()];
                for ((gr, yr), gxr) in g.chunks(n).zip(yc.chunks(n)).zip(gx.chunks_mut(n)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for ((o, &gi), &yi) in gxr.iter_mut().zip(gr).zip(yr) {
                        *o = yi * (gi - dot);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// `x − logsumexp(x)` over the last axis.
    pub fn log_softmax_last(&self) -> Result<Tensor> {
        if self.ndim() == 0 {
            return shape_err("log-softmax of a scalar");
        }
        let n = *self.shape().last().unwrap();
        let mut y = self.to_vec();
        let mut probs = vec![0.0; y.len()];
        for (yr, pr) in y.chunks_mut(n).zip(probs.chunks_mut(n)) {
            let mx = yr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + yr.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            for (v, p) in yr.iter_mut().zip(pr.iter_mut()) {
                *v -= lse;
                *p = v.exp();
            }
        }
        Ok(Tensor::from_op(
            y,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; g.len()];
                for ((gr, pr), gxr) in g.chunks(n).zip(probs.chunks(n)).zip(gx.chunks_mut(n)) {
                    let s: f64 = gr.iter().sum();
                    for ((o, &gi), &pi) in gxr.iter_mut().zip(gr).zip(pr) {
                        *o = gi - pi * s;
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Normalizes the last axis to zero mean and unit variance (no affine).
    pub fn layer_norm_last(&self, eps: f64) -> Result<Tensor> {
        if self.ndim() == 0 {
            return shape_err("layer norm of a scalar");
        }
        let n = *self.shape().last().unwrap();
        let x = self.data();
        let mut y = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(x.len() / n.max(1));
        for (xr, yr) in x.chunks(n).zip(y.chunks_mut(n)) {
            let mean = xr.iter().sum::<f64>() / n as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            for (o, v) in yr.iter_mut().zip(xr) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let yc = y.clone();
        Ok(Tensor::from_op(
            y,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; g.len()];
                for (((gr, yr), gxr), &is) in
                    g.chunks(n).zip(yc.chunks(n)).zip(gx.chunks_mut(n)).zip(&inv_std)
                {
                    let mg = gr.iter().sum::<f64>() / n as f64;
                    let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    for ((o, &gi), &yi) in gxr.iter_mut().zip(gr).zip(yr) {
                        *o = is * (gi - mg - yi * mgy);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Temporal convolution over axis `ndim-3` of `[..., L, N, C_in]` with
    /// kernel `[K, C_in, C_out]`, odd `K`, dilation `d`, zero padding that
    /// keeps `L`. Each node is convolved independently.
    pub fn temporal_conv(&self, kernel: &Tensor, dilation: usize) -> Result<Tensor> {
        if self.ndim() < 3 || kernel.ndim() != 3 {
            return shape_err(format!(
                "temporal_conv wants [..., L, N, C] and [K, Cin, Cout], got {:?} and {:?}",
                self.shape(),
                kernel.shape()
            ));
        }
        let nd = self.ndim();
        let (l, nodes, cin) = (self.dim(nd - 3), self.dim(nd - 2), self.dim(nd - 1));
        let (k, kin, cout) = (kernel.dim(0), kernel.dim(1), kernel.dim(2));
        if kin != cin || k % 2 == 0 || dilation == 0 {
            return shape_err(format!(
                "temporal_conv kernel {:?} incompatible with input {:?} (dilation {})",
                kernel.shape(),
                self.shape(),
                dilation
            ));
        }
        let batch: usize = self.shape()[..nd - 3].iter().product();
        let half = (k - 1) / 2;
        let frame_in = nodes * cin;
        let frame_out = nodes * cout;
        let x = self.data();
        let w = kernel.data();
        let mut out = vec![0.0; batch * l * frame_out];
        let pairs = move |t: usize| {
            (0..k).filter_map(move |tap| {
                let s = t as isize + (tap as isize - half as isize) * dilation as isize;
                (s >= 0 && (s as usize) < l).then_some((tap, s as usize))
            })
        };
        for b in 0..batch {
            for t in 0..l {
                let o = &mut out[(b * l + t) * frame_out..(b * l + t + 1) * frame_out];
                for (tap, s) in pairs(t) {
                    let xs = &x[(b * l + s) * frame_in..(b * l + s + 1) * frame_in];
                    gemm(xs, &w[tap * cin * cout..(tap + 1) * cin * cout], o, nodes, cin, cout);
                }
            }
        }
        let mut out_shape = self.shape().to_vec();
        out_shape[nd - 1] = cout;
        let (px, pw) = (self.clone(), kernel.clone());
        Ok(Tensor::from_op(
            out,
            out_shape,
            vec![self.clone(), kernel.clone()],
            Box::new(move |g| {
                let (x, w) = (px.data(), pw.data());
                let mut gx = px.requires_grad().then(|| vec![0.0; x.len()]);
                let mut gw = pw.requires_grad().then(|| vec![0.0; w.len()]);
                for b in 0..batch {
                    for t in 0..l {
                        let gt = &g[(b * l + t) * frame_out..(b * l + t + 1) * frame_out];
                        for (tap, s) in pairs(t) {
                            let ws = tap * cin * cout..(tap + 1) * cin * cout;
                            let xs = (b * l + s) * frame_in..(b * l + s + 1) * frame_in;
                            if let Some(gx) = gx.as_mut() {
                                gemm_nt(gt, &w[ws.clone()], &mut gx[xs.clone()], nodes, cin, cout);
                            }
                            if let Some(gw) = gw.as_mut() {
                                gemm_tn(&x[xs], gt, &mut gw[ws], nodes, cin, cout);
                            }
                        }
                    }
                }
                vec![gx, gw]
            }),
        ))
    }

    /// Max over a centered window of `k` frames (axis `ndim-3`); positions
    /// outside the sequence are ignored rather than padded.
    pub fn temporal_max_pool(&self, k: usize) -> Result<Tensor> {
        if self.ndim() < 3 || k % 2 == 0 {
            return shape_err(format!("temporal_max_pool(k={}) on {:?}", k, self.shape()));
        }
        let nd = self.ndim();
        let l = self.dim(nd - 3);
        let frame = self.dim(nd - 2) * self.dim(nd - 1);
        let batch: usize = self.shape()[..nd - 3].iter().product();
        let half = (k - 1) / 2;
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        let mut arg = vec![0usize; x.len()];
        for b in 0..batch {
            for t in 0..l {
                let lo = t.saturating_sub(half);
                let hi = (t + half).min(l - 1);
                for f in 0..frame {
                    let oi = (b * l + t) * frame + f;
                    let mut best = (b * l + lo) * frame + f;
                    for s in lo + 1..=hi {
                        let ii = (b * l + s) * frame + f;
                        if x[ii] > x[best] {
                            best = ii;
                        }
                    }
                    out[oi] = x[best];
                    arg[oi] = best;
                }
            }
        }
        let n = x.len();
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; n];
                for (gi, &a) in g.iter().zip(&arg) {
                    gx[a] += gi;
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Per-segment column max of a `[P, D]` matrix; every segment in
    /// `0..n_segments` must own at least one row.
    pub fn segment_max(&self, segments: &[usize], n_segments: usize) -> Result<Tensor> {
        if self.ndim() != 2 || segments.len() != self.dim(0) {
            return shape_err(format!(
                "segment_max on {:?} with {} segment ids",
                self.shape(),
                segments.len()
            ));
        }
        let d = self.dim(1);
        let x = self.data();
        let mut arg: Vec<Option<usize>> = vec![None; n_segments * d];
        for (row, &s) in segments.iter().enumerate() {
            if s >= n_segments {
                return shape_err(format!("segment id {} out of range {}", s, n_segments));
            }
            for c in 0..d {
                let slot = &mut arg[s * d + c];
                let i = row * d + c;
                if slot.map_or(true, |b| x[i] > x[b]) {
                    *slot = Some(i);
                }
            }
        }
        let arg: Vec<usize> = arg
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| NnError::Shape("segment_max: empty segment".into()))?;
        let out = arg.iter().map(|&i| x[i]).collect();
        let n = x.len();
        Ok(Tensor::from_op(
            out,
            vec![n_segments, d],
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; n];
                for (gi, &a) in g.iter().zip(&arg) {
                    gx[a] += gi;
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Inverted dropout; identity when `p == 0`.
    pub fn dropout<R: Rng>(&self, p: f64, rng: &mut R) -> Result<Tensor> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::Config(format!("dropout rate {} not in [0, 1)", p)));
        }
        if p == 0.0 {
            return Ok(self.clone());
        }
        let keep: Vec<f64> = (0..self.numel())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
            .collect();
        let mask = Tensor::from_vec(keep, self.shape())?;
        self.mul(&mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_softmax_is_log_of_softmax() {
        let x = Tensor::from_vec(vec![1.0, -2.0, 0.5, 300.0, 301.0, 299.0], &[2, 3]).unwrap();
        let a = x.log_softmax_last().unwrap();
        let b = x.softmax_last().unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_uniform_logits() {
        let x = Tensor::full(&[2, 4], 3.7);
        let y = x.softmax_last().unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn masked_softmax_zeroes_disallowed() {
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[1, 4]).unwrap();
        let m = Mask::new(vec![true, false, true, false], &[1, 4]).unwrap();
        let y = x.masked_softmax_last(&m).unwrap();
        assert_eq!(y.data()[1], 0.0);
        assert_eq!(y.data()[3], 0.0);
        assert!((y.data()[0] + y.data()[2] - 1.0).abs() < 1e-15);
        let dead = Mask::new(vec![false; 4], &[1, 4]).unwrap();
        assert!(matches!(x.masked_softmax_last(&dead), Err(NnError::Mask(_))));
    }

    #[test]
    fn layer_norm_constant_is_zero() {
        let x = Tensor::full(&[3, 5], 2.5);
        let y = x.layer_norm_last(1e-5).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_matches_taps() {
        // L=7, one node, one channel; impulse at t=3.
        let mut xs = vec![0.0; 7];
        xs[3] = 1.0;
        let x = Tensor::from_vec(xs, &[7, 1, 1]).unwrap();
        let taps = [0.2, -0.5, 0.7];
        let w = Tensor::from_vec(taps.to_vec(), &[3, 1, 1]).unwrap();
        for dil in [1usize, 2] {
            let y = x.temporal_conv(&w, dil).unwrap();
            // y[t] = sum_tap w[tap] x[t + (tap-1) d]  =>  y[3 - (tap-1) d] = w[tap]
            let mut want = vec![0.0; 7];
            for (tap, &wt) in taps.iter().enumerate() {
                let t = 3 - (tap as isize - 1) * dil as isize;
                want[t as usize] += wt;
            }
            assert_eq!(y.data(), want.as_slice(), "dilation {}", dil);
        }
    }

    #[test]
    fn max_pool_edges_ignore_padding() {
        let x = Tensor::from_vec(vec![-3.0, -1.0, -2.0, -5.0], &[4, 1, 1]).unwrap();
        let y = x.temporal_max_pool(3).unwrap();
        assert_eq!(y.data(), &[-1.0, -1.0, -1.0, -2.0]);
    }

    #[test]
    fn segment_max_requires_nonempty() {
        let x = Tensor::from_vec(vec![1.0, 5.0, 3.0, 2.0], &[2, 2]).unwrap();
        let y = x.segment_max(&[0, 0], 1).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        assert!(x.segment_max(&[0, 0], 2).is_err());
    }
}
