use crate::error::{shape_err, Result};
use crate::ops::elementwise::{broadcast_index_map, broadcast_shape, reduce_to};
use crate::tensor::{numel, strides, Tensor};

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return shape_err(format!("cannot reshape {:?} into {:?}", self.shape(), shape));
        }
        Ok(Tensor::from_op(
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            Box::new(|g| vec![Some(g.to_vec())]),
        ))
    }

    /// General axis permutation: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let n = self.ndim();
        let mut seen = vec![false; n];
        if axes.len() != n || axes.iter().any(|&a| a >= n || std::mem::replace(&mut seen[a], true)) {
            return shape_err(format!("invalid permutation {:?} for {:?}", axes, self.shape()));
        }
        let in_shape = self.shape();
        let in_strides = strides(in_shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let total = self.numel();
        // map[out_linear] = in_linear
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        let mut lin = 0usize;
        for _ in 0..total {
            map.push(lin);
            for d in (0..n).rev() {
                idx[d] += 1;
                lin += src_strides[d];
                if idx[d] < out_shape[d] {
                    break;
                }
                lin -= src_strides[d] * idx[d];
                idx[d] = 0;
            }
        }
        let x = self.data();
        let data = map.iter().map(|&j| x[j]).collect();
        Ok(Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; g.len()];
                for (gi, &j) in g.iter().zip(&map) {
                    gx[j] = *gi;
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose_last(&self) -> Result<Tensor> {
        let n = self.ndim();
        if n < 2 {
            return shape_err("transpose needs at least 2 axes");
        }
        let mut axes: Vec<usize> = (0..n).collect();
        axes.swap(n - 2, n - 1);
        self.permute(&axes)
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.ndim() || start + len > self.dim(axis) {
            return shape_err(format!(
                "narrow({}, {}, {}) out of range for {:?}",
                axis,
                start,
                len,
                self.shape()
            ));
        }
        let shape = self.shape();
        let outer: usize = shape[..axis].iter().product();
        let full = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let x = self.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&x[base..base + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        Ok(Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; outer * full * inner];
                for o in 0..outer {
                    let base = (o * full + start) * inner;
                    gx[base..base + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Concatenates along `axis`; all other axes must agree.
    pub fn concat(tensors: &[Tensor], axis: usize) -> Result<Tensor> {
        let Some(first) = tensors.first() else {
            return shape_err("concat of zero tensors");
        };
        let nd = first.ndim();
        if axis >= nd {
            return shape_err(format!("concat axis {} out of range", axis));
        }
        for t in tensors {
            let ok = t.ndim() == nd
                && t.shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return shape_err(format!(
                    "concat shape mismatch: {:?} vs {:?} on axis {}",
                    t.shape(),
                    first.shape(),
                    axis
                ));
            }
        }
        let outer: usize = first.shape()[..axis].iter().product();
        let inner: usize = first.shape()[axis + 1..].iter().product();
        let lens: Vec<usize> = tensors.iter().map(|t| t.dim(axis)).collect();
        let total_len: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(outer * total_len * inner);
        for o in 0..outer {
            for (t, &l) in tensors.iter().zip(&lens) {
                data.extend_from_slice(&t.data()[o * l * inner..(o + 1) * l * inner]);
            }
        }
        let mut out_shape = first.shape().to_vec();
        out_shape[axis] = total_len;
        let lens_c = lens.clone();
        Ok(Tensor::from_op(
            data,
            out_shape,
            tensors.to_vec(),
            Box::new(move |g| {
                let mut grads: Vec<Vec<f64>> =
                    lens_c.iter().map(|&l| Vec::with_capacity(outer * l * inner)).collect();
                let mut pos = 0;
                for _ in 0..outer {
                    for (gk, &l) in grads.iter_mut().zip(&lens_c) {
                        gk.extend_from_slice(&g[pos..pos + l * inner]);
                        pos += l * inner;
                    }
                }
                grads.into_iter().map(Some).collect()
            }),
        ))
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(tensors: &[Tensor]) -> Result<Tensor> {
        let expanded: Vec<Tensor> = tensors
            .iter()
            .map(|t| {
                let mut s = vec![1];
                s.extend_from_slice(t.shape());
                t.reshape(&s)
            })
            .collect::<Result<_>>()?;
        Tensor::concat(&expanded, 0)
    }

    /// Broadcasts to `shape` (numpy rules); the backward pass sums.
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        let out = broadcast_shape(self.shape(), shape)?;
        if out != shape {
            return shape_err(format!("cannot broadcast {:?} to {:?}", self.shape(), shape));
        }
        let map = broadcast_index_map(self.shape(), shape);
        let x = self.data();
        let data = map.iter().map(|&j| x[j]).collect();
        let in_shape = self.shape().to_vec();
        let out_shape = shape.to_vec();
        Ok(Tensor::from_op(
            data,
            shape.to_vec(),
            vec![self.clone()],
            Box::new(move |g| vec![Some(reduce_to(g, &in_shape, &out_shape))]),
        ))
    }

    /// Gathers rows of a 2-D table; output `[indices.len(), cols]`.
    pub fn index_select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        if self.ndim() != 2 {
            return shape_err(format!("index_select_rows needs a matrix, got {:?}", self.shape()));
        }
        let (rows, cols) = (self.dim(0), self.dim(1));
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return shape_err(format!("row index {} out of range {}", bad, rows));
        }
        let x = self.data();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(&x[i * cols..(i + 1) * cols]);
        }
        let idx = indices.to_vec();
        Ok(Tensor::from_op(
            data,
            vec![indices.len(), cols],
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; rows * cols];
                for (k, &i) in idx.iter().enumerate() {
                    for c in 0..cols {
                        gx[i * cols + c] += g[k * cols + c];
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }
}
