use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// c[m×n] += a[m×k] · b[k×n]
pub(crate) fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// c[k×n] += a[m×k]ᵀ · g[m×n]
pub(crate) fn gemm_tn(a: &[f64], g: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, gv) in crow.iter_mut().zip(grow) {
                *cv += av * gv;
            }
        }
    }
}

/// c[m×k] += g[m×n] · b[k×n]ᵀ
pub(crate) fn gemm_nt(g: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            c[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

impl Tensor {
    /// Matrix product over the last two axes. Either operand may be a plain
    /// matrix shared across the other's batch axes; otherwise batch axes must
    /// match exactly.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() < 2 || sb.len() < 2 {
            return shape_err(format!("matmul needs matrices, got {:?} and {:?}", sa, sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return shape_err(format!("matmul inner dims differ: {:?} x {:?}", sa, sb));
        }
        let batch_a = &sa[..sa.len() - 2];
        let batch_b = &sb[..sb.len() - 2];
        let mode = if batch_b.is_empty() {
            Mode::SharedRight
        } else if batch_a.is_empty() {
            Mode::SharedLeft
        } else if batch_a == batch_b {
            Mode::Batched
        } else {
            return shape_err(format!("matmul batch dims differ: {:?} x {:?}", sa, sb));
        };
        let batch: usize = match mode {
            Mode::SharedLeft => batch_b.iter().product(),
            _ => batch_a.iter().product(),
        };
        let mut out_shape: Vec<usize> = match mode {
            Mode::SharedLeft => batch_b.to_vec(),
            _ => batch_a.to_vec(),
        };
        out_shape.extend([m, n]);

        let (a, b) = (self.data(), other.data());
        let mut out = vec![0.0; batch * m * n];
        match mode {
            Mode::SharedRight => gemm(a, b, &mut out, batch * m, k, n),
            Mode::SharedLeft => {
                for bi in 0..batch {
                    gemm(a, &b[bi * k * n..(bi + 1) * k * n], &mut out[bi * m * n..(bi + 1) * m * n], m, k, n);
                }
            }
            Mode::Batched => {
                for bi in 0..batch {
                    gemm(
                        &a[bi * m * k..(bi + 1) * m * k],
                        &b[bi * k * n..(bi + 1) * k * n],
                        &mut out[bi * m * n..(bi + 1) * m * n],
                        m,
                        k,
                        n,
                    );
                }
            }
        }

        let (pa, pb) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            out,
            out_shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let (a, b) = (pa.data(), pb.data());
                let mut ga = pa.requires_grad().then(|| vec![0.0; a.len()]);
                let mut gb = pb.requires_grad().then(|| vec![0.0; b.len()]);
                match mode {
                    Mode::SharedRight => {
                        if let Some(ga) = ga.as_mut() {
                            gemm_nt(g, b, ga, batch * m, k, n);
                        }
                        if let Some(gb) = gb.as_mut() {
                            gemm_tn(a, g, gb, batch * m, k, n);
                        }
                    }
                    Mode::SharedLeft | Mode::Batched => {
                        for bi in 0..batch {
                            let gs = &g[bi * m * n..(bi + 1) * m * n];
                            let bs = &b[bi * k * n..(bi + 1) * k * n];
                            let a_off = if mode == Mode::Batched { bi * m * k } else { 0 };
                            let asl = &a[a_off..a_off + m * k];
                            if let Some(ga) = ga.as_mut() {
                                gemm_nt(gs, bs, &mut ga[a_off..a_off + m * k], m, k, n);
                            }
                            if let Some(gb) = gb.as_mut() {
                                gemm_tn(asl, gs, &mut gb[bi * k * n..(bi + 1) * k * n], m, k, n);
                            }
                        }
                    }
                }
                vec![ga, gb]
            }),
        ))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    SharedRight,
    SharedLeft,
    Batched,
}
