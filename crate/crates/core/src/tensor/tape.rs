use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// Backward rule: given the output gradient and which parents need a
/// gradient, returns one optional gradient per parent.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>>>;

struct Node<T> {
    value: Tensor<T>,
    parents: Vec<usize>,
    requires_grad: bool,
    backward: Option<BackwardFn<T>>,
}

/// Ordered record of executed operations.
///
/// A tape and its vars are a single-threaded unit of work; concurrent
/// computations use separate tapes.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a [`Tape`].
pub struct Var<'t, T> {
    pub(crate) tape: &'t Tape<T>,
    pub(crate) id: usize,
}

impl<T> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Var<'_, T> {}

impl<T> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// Registers a differentiable input (a parameter).
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Node {
            value,
            parents: Vec::new(),
            requires_grad: true,
            backward: None,
        })
    }

    /// Registers an input that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Node {
            value,
            parents: Vec::new(),
            requires_grad: false,
            backward: None,
        })
    }

    /// Number of recorded nodes (leaves included).
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Records an op output. The backward rule is dropped when no parent
    /// needs a gradient.
    pub(crate) fn record(
        &self,
        op: &'static str,
        value: Tensor<T>,
        parents: &[Var<'_, T>],
        backward: BackwardFn<T>,
    ) -> Result<Var<'_, T>> {
        let value = value.check_finite(op)?;
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        Ok(self.push(Node {
            value,
            parents: parents.iter().map(|p| p.id).collect(),
            requires_grad,
            backward: requires_grad.then_some(backward),
        }))
    }

    pub(crate) fn value_of(&self, id: usize) -> Tensor<T> {
        self.nodes.borrow()[id].value.clone()
    }

    pub(crate) fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Every differentiable leaf recorded before `loss` gets an entry in the
    /// result; leaves the loss does not depend on get zeros.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut pending: Vec<Option<Tensor<T>>> = vec![None; loss.id + 1];
        pending[loss.id] = Some(Tensor::ones(root.value.shape()));
        let mut leaves = HashMap::new();

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let grad = pending[id].take();
            match &node.backward {
                None => {
                    let g = grad.unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                    leaves.insert(id, g);
                }
                Some(rule) => {
                    let Some(g) = grad else { continue };
                    let needs: Vec<bool> =
                        node.parents.iter().map(|&p| nodes[p].requires_grad).collect();
                    let parent_grads = rule(&g, &needs);
                    for ((&p, need), pg) in node.parents.iter().zip(&needs).zip(parent_grads) {
                        let (true, Some(pg)) = (*need, pg) else { continue };
                        accumulate(&mut pending[p], pg);
                    }
                }
            }
        }
        Ok(Gradients { by_id: leaves })
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += *b;
            }
        }
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients<T> {
    by_id: HashMap<usize, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf var. `None` for constants and for leaves recorded
    /// after the loss.
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.by_id.get(&var.id)
    }

    pub fn take(&mut self, var: Var<'_, T>) -> Option<Tensor<T>> {
        self.by_id.remove(&var.id)
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn value(&self) -> Tensor<T> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }
}
