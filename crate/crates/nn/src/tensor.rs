//! Dense row-major `f64` tensors with a reverse-mode tape.
//!
//! Every op that touches a tensor requiring gradients records its parents and
//! a vector-Jacobian closure. [`Tensor::backward`] walks the recorded graph in
//! reverse topological order and returns gradients for every leaf that asked
//! for one. Tensors are immutable, so parameter updates replace the leaf.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{shape_err, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Vector-Jacobian product: maps the output gradient to one optional gradient
/// per parent, in parent order.
pub type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Option<Vec<f64>>> + Send + Sync>;

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
}

#[derive(Clone)]
pub struct Tensor(Arc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn leaf(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            parents: Vec::new(),
            backward: None,
        }))
    }

    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if data.len() != numel(shape) {
            return shape_err(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            ));
        }
        Ok(Tensor::leaf(data, shape.to_vec(), false))
    }

    /// Leaf tensor that accumulates a gradient during [`Tensor::backward`].
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let t = Tensor::from_vec(data, shape)?;
        Ok(t.requires_grad_leaf())
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::leaf(vec![0.0; numel(shape)], shape.to_vec(), false)
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Tensor::leaf(vec![value; numel(shape)], shape.to_vec(), false)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::leaf(vec![value], Vec::new(), false)
    }

    /// Copy of this tensor as a fresh leaf with `requires_grad` set.
    pub fn requires_grad_leaf(&self) -> Tensor {
        Tensor::leaf(self.0.data.clone(), self.0.shape.clone(), true)
    }

    /// Copy of this tensor cut from the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::leaf(self.0.data.clone(), self.0.shape.clone(), false)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.0.shape[axis]
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1);
        self.0.data[0]
    }

    /// Builds an op result. The closure is only kept when some parent needs
    /// gradients, so no-grad forward passes carry no tape.
    pub fn from_op(
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        debug_assert_eq!(data.len(), numel(&shape));
        let requires_grad = parents.iter().any(Tensor::requires_grad);
        if !requires_grad {
            return Tensor::leaf(data, shape, false);
        }
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad: true,
            parents,
            backward: Some(backward),
        }))
    }

    /// Public hook for ops defined outside this crate (geometry losses,
    /// sequence decoding). Same contract as the built-in ops.
    pub fn custom<F>(data: Vec<f64>, shape: &[usize], parents: Vec<Tensor>, backward: F) -> Result<Tensor>
    where
        F: Fn(&[f64]) -> Vec<Option<Vec<f64>>> + Send + Sync + 'static,
    {
        if data.len() != numel(shape) {
            return shape_err(format!(
                "custom op produced {} values for shape {:?}",
                data.len(),
                shape
            ));
        }
        Ok(Tensor::from_op(data, shape.to_vec(), parents, Box::new(backward)))
    }

    /// Backpropagates from a scalar.
    pub fn backward(&self) -> Result<Gradients> {
        if self.numel() != 1 {
            return shape_err(format!(
                "backward() needs a scalar, got shape {:?}",
                self.shape()
            ));
        }
        self.backward_with(vec![1.0])
    }

    /// Backpropagates an arbitrary output cotangent.
    pub fn backward_with(&self, seed: Vec<f64>) -> Result<Gradients> {
        if seed.len() != self.numel() {
            return shape_err(format!(
                "seed length {} does not match output size {}",
                seed.len(),
                self.numel()
            ));
        }
        let order = self.topo_order();
        let mut pending: HashMap<u64, Vec<f64>> = HashMap::new();
        let mut leaves: HashMap<u64, Vec<f64>> = HashMap::new();
        pending.insert(self.id(), seed);

        for node in order.iter().rev() {
            let Some(grad) = pending.remove(&node.id()) else {
                continue;
            };
            let Some(backward) = node.0.backward.as_ref() else {
                leaves.insert(node.id(), grad);
                continue;
            };
            let parent_grads = backward(&grad);
            debug_assert_eq!(parent_grads.len(), node.0.parents.len());
            for (parent, pg) in node.0.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !parent.requires_grad() {
                    continue;
                }
                debug_assert_eq!(pg.len(), parent.numel());
                match pending.get_mut(&parent.id()) {
                    Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, g)| *a += g),
                    None => {
                        pending.insert(parent.id(), pg);
                    }
                }
            }
        }
        Ok(Gradients { grads: leaves })
    }

    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        // (node, children pushed?)
        let mut stack = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.id()) {
                continue;
            }
            stack.push((node.clone(), true));
            for p in &node.0.parents {
                if p.requires_grad() && !visited.contains(&p.id()) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }
}

impl Drop for Node {
    // Long parent chains would otherwise recurse once per node on drop.
    fn drop(&mut self) {
        // Closures hold clones of the parents; release them first so the
        // parent list holds the last reference.
        drop(self.backward.take());
        let mut stack: Vec<Tensor> = std::mem::take(&mut self.parents);
        while let Some(t) = stack.pop() {
            if let Ok(mut node) = Arc::try_unwrap(t.0) {
                stack.append(&mut node.parents);
            }
        }
    }
}

/// Leaf gradients produced by a backward pass, keyed by tensor identity.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: HashMap<u64, Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, t: &Tensor) -> Option<&[f64]> {
        self.grads.get(&t.id()).map(Vec::as_slice)
    }

    /// Gradient of `t`, or zeros when `t` did not influence the output.
    pub fn get_or_zeros(&self, t: &Tensor) -> Vec<f64> {
        self.get(t)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; t.numel()])
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Row-major strides for `shape`.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(vec![1.0; 5], &[2, 3]).is_err());
        let t = Tensor::from_vec(vec![1.0; 6], &[2, 3]).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert!(!t.requires_grad());
    }

    #[test]
    fn no_grad_ops_carry_no_tape() {
        let a = Tensor::ones(&[3]);
        let b = a.add(&a).unwrap();
        assert!(!b.requires_grad());
        assert!(b.0.parents.is_empty());
    }

    #[test]
    fn gradient_accumulates_over_shared_use() {
        let x = Tensor::param(vec![1.0, 2.0, 3.0], &[3]).unwrap();
        let y = x.mul(&x).unwrap().add(&x).unwrap().sum_all();
        let g = y.backward().unwrap();
        assert_eq!(g.get(&x).unwrap(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn deep_chain_drops_without_overflow() {
        let x = Tensor::param(vec![1.0], &[1]).unwrap();
        let mut y = x.clone();
        for _ in 0..200_000 {
            y = y.scale(1.0);
        }
        let g = y.sum_all().backward().unwrap();
        assert_eq!(g.get(&x).unwrap(), &[1.0]);
    }
}
