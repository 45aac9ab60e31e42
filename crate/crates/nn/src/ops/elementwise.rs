use crate::error::{shape_err, Result};
use crate::tensor::{numel, strides, Tensor};

pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = if da == db || db == 1 {
            da
        } else if da == 1 {
            db
        } else {
            return shape_err(format!("cannot broadcast {:?} with {:?}", a, b));
        };
    }
    Ok(out)
}

/// Input linear index for every output linear index under broadcasting.
pub(crate) fn broadcast_index_map(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let n = out_shape.len();
    let offset = n - in_shape.len();
    let in_strides = strides(in_shape);
    let mut eff = vec![0usize; n];
    for i in 0..in_shape.len() {
        eff[i + offset] = if in_shape[i] == 1 { 0 } else { in_strides[i] };
    }
    let total = numel(out_shape);
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    let mut lin = 0usize;
    for _ in 0..total {
        map.push(lin);
        for d in (0..n).rev() {
            idx[d] += 1;
            lin += eff[d];
            if idx[d] < out_shape[d] {
                break;
            }
            lin -= eff[d] * idx[d];
            idx[d] = 0;
        }
    }
    map
}

/// Sums `grad` (shaped like the broadcast output) back onto `in_shape`.
pub(crate) fn reduce_to(grad: &[f64], in_shape: &[usize], out_shape: &[usize]) -> Vec<f64> {
    if in_shape == out_shape {
        return grad.to_vec();
    }
    let map = broadcast_index_map(in_shape, out_shape);
    let mut acc = vec![0.0; numel(in_shape)];
    for (g, &j) in grad.iter().zip(&map) {
        acc[j] += g;
    }
    acc
}

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        }
    }

    fn grads(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            BinOp::Add => (1.0, 1.0),
            BinOp::Sub => (1.0, -1.0),
            BinOp::Mul => (b, a),
            BinOp::Div => (1.0 / b, -a / (b * b)),
        }
    }
}

impl Tensor {
    fn binary(&self, other: &Tensor, op: BinOp) -> Result<Tensor> {
        let out_shape = broadcast_shape(self.shape(), other.shape())?;
        let same = self.shape() == other.shape();
        let (ma, mb) = if same {
            (None, None)
        } else {
            (
                Some(broadcast_index_map(self.shape(), &out_shape)),
                Some(broadcast_index_map(other.shape(), &out_shape)),
            )
        };
        let a = self.data();
        let b = other.data();
        let n = numel(&out_shape);
        let data: Vec<f64> = match (&ma, &mb) {
            (Some(ma), Some(mb)) => (0..n).map(|i| op.apply(a[ma[i]], b[mb[i]])).collect(),
            _ => a.iter().zip(b).map(|(&x, &y)| op.apply(x, y)).collect(),
        };
        let (pa, pb) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            data,
            out_shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let a = pa.data();
                let b = pb.data();
                let mut ga = pa.requires_grad().then(|| vec![0.0; a.len()]);
                let mut gb = pb.requires_grad().then(|| vec![0.0; b.len()]);
                for (i, gi) in g.iter().enumerate() {
                    let (ia, ib) = match (&ma, &mb) {
                        (Some(ma), Some(mb)) => (ma[i], mb[i]),
                        _ => (i, i),
                    };
                    let (da, db) = op.grads(a[ia], b[ib]);
                    if let Some(ga) = ga.as_mut() {
                        ga[ia] += gi * da;
                    }
                    if let Some(gb) = gb.as_mut() {
                        gb[ib] += gi * db;
                    }
                }
                vec![ga, gb]
            }),
        ))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, BinOp::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, BinOp::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, BinOp::Mul)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, BinOp::Div)
    }

    fn unary(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Tensor {
        let data = self.data().iter().map(|&x| f(x)).collect();
        let p = self.clone();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let x = p.data();
                vec![Some(g.iter().zip(x).map(|(gi, &xi)| gi * df(xi)).collect())]
            }),
        )
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.unary(move |x| x * s, move |_| s)
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.unary(move |x| x + c, |_| 1.0)
    }

    pub fn square(&self) -> Tensor {
        self.unary(|x| x * x, |x| 2.0 * x)
    }

    pub fn exp(&self) -> Tensor {
        self.unary(f64::exp, f64::exp)
    }

    pub fn ln(&self) -> Tensor {
        self.unary(f64::ln, |x| 1.0 / x)
    }

    pub fn sqrt(&self) -> Tensor {
        self.unary(f64::sqrt, |x| 0.5 / x.sqrt())
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(f64::tanh, |x| {
            let t = x.tanh();
            1.0 - t * t
        })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(sigmoid, |x| {
            let s = sigmoid(x);
            s * (1.0 - s)
        })
    }

    pub fn relu(&self) -> Tensor {
        self.unary(|x| x.max(0.0), |x| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// x · sigmoid(x)
    pub fn silu(&self) -> Tensor {
        self.unary(
            |x| x * sigmoid(x),
            |x| {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            },
        )
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&self) -> Tensor {
        self.unary(gelu, gelu_grad)
    }

    pub fn sum_all(&self) -> Tensor {
        let n = self.numel();
        Tensor::from_op(
            vec![self.data().iter().sum()],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.numel().max(1);
        self.sum_all().scale(1.0 / n as f64)
    }

    /// Sum over `axis`; the axis is removed unless `keepdim`.
    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        if axis >= self.ndim() {
            return shape_err(format!("sum axis {} out of range for {:?}", axis, self.shape()));
        }
        let shape = self.shape();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let x = self.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let base = (o * len + a) * inner;
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(&x[base..base + inner]) {
                    *d += s;
                }
            }
        }
        let mut out_shape = shape.to_vec();
        if keepdim {
            out_shape[axis] = 1;
        } else {
            out_shape.remove(axis);
        }
        Ok(Tensor::from_op(
            out,
            out_shape,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    let src = &g[o * inner..(o + 1) * inner];
                    for a in 0..len {
                        let base = (o * len + a) * inner;
                        gx[base..base + inner].copy_from_slice(src);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let n = self.shape().get(axis).copied().unwrap_or(1).max(1);
        Ok(self.sum_axis(axis, keepdim)?.scale(1.0 / n as f64))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}
