//! Reverse-mode differentiation tape.
//!
//! Operations append nodes to a Wengert list while recording is enabled.
//! `backward` sweeps the list in reverse, expressing each node's
//! vector-Jacobian product through the same operation set: with
//! `create_graph` the sweep itself is recorded, which is what supports
//! differentiating the discriminator's input-gradient norm once more for
//! the R1 penalty.

use std::cell::RefCell;
use std::rc::Rc;

use super::elem::Elem;
use super::ops::Op;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub struct Tape<T: Elem> {
    inner: Rc<RefCell<TapeInner<T>>>,
}

impl<T: Elem> Clone for Tape<T> {
    fn clone(&self) -> Self {
        Tape { inner: self.inner.clone() }
    }
}

pub(crate) struct TapeInner<T: Elem> {
    pub(crate) nodes: Vec<Node<T>>,
    pub(crate) grad_enabled: bool,
    consumed: bool,
}

pub(crate) struct Node<T: Elem> {
    pub(crate) op: Op<T>,
    /// Node ids of differentiable inputs, aligned with the op's vjp outputs.
    pub(crate) parents: Vec<Option<usize>>,
}

impl<T: Elem> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Elem> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                grad_enabled: true,
                consumed: false,
            })),
        }
    }

    pub fn same_tape(&self, other: &Tape<T>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn grad_enabled(&self) -> bool {
        self.inner.borrow().grad_enabled
    }

    pub(crate) fn push(&self, node: Node<T>) -> usize {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(node);
        inner.nodes.len() - 1
    }

    /// Tracked leaf holding the given buffer; gradients accumulate at leaves.
    pub fn leaf(&self, data: Vec<T>, shape: Vec<usize>) -> Tensor<T> {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "leaf shape/buffer mismatch"
        );
        let id = self.push(Node { op: Op::Leaf, parents: vec![] });
        Tensor::tracked(Rc::new(data), shape, self.clone(), id)
    }

    /// Leaf sharing an existing buffer (parameters bind this way, so a
    /// forward pass never copies weights).
    pub fn leaf_shared(&self, data: Rc<Vec<T>>, shape: Vec<usize>) -> Tensor<T> {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        let id = self.push(Node { op: Op::Leaf, parents: vec![] });
        Tensor::tracked(data, shape, self.clone(), id)
    }

    /// Runs `f` with recording paused; anything computed inside is constant.
    pub fn no_grad<R>(&self, f: impl FnOnce() -> R) -> R {
        let was = {
            let mut inner = self.inner.borrow_mut();
            let was = inner.grad_enabled;
            inner.grad_enabled = false;
            was
        };
        let out = f();
        self.inner.borrow_mut().grad_enabled = was;
        out
    }

    /// Reverse sweep from a scalar root. With `create_graph` the computed
    /// gradients stay on the tape and can be differentiated once more;
    /// without it the tape is marked consumed.
    pub fn backward(&self, root: &Tensor<T>, create_graph: bool) -> Result<Gradients<T>> {
        if root.numel() != 1 {
            return Err(Error::NonScalarRoot(root.shape().to_vec()));
        }
        let root_id = match root.node_id_on(self) {
            Some(id) => id,
            None => return Ok(Gradients { grads: Vec::new() }),
        };
        {
            let inner = self.inner.borrow();
            if inner.consumed {
                return Err(Error::TapeConsumed);
            }
        }

        let n0 = self.len();
        let mut reachable = vec![false; n0];
        {
            let inner = self.inner.borrow();
            let mut stack = vec![root_id];
            reachable[root_id] = true;
            while let Some(id) = stack.pop() {
                for p in inner.nodes[id].parents.iter().flatten() {
                    if !reachable[*p] {
                        reachable[*p] = true;
                        stack.push(*p);
                    }
                }
            }
        }

        let mut grads: Vec<Option<Tensor<T>>> = (0..n0).map(|_| None).collect();
        grads[root_id] = Some(Tensor::from_vec(vec![T::one()], root.shape().to_vec()));

        let was_enabled = {
            let mut inner = self.inner.borrow_mut();
            let was = inner.grad_enabled;
            inner.grad_enabled = create_graph;
            was
        };
        let sweep = (|| -> Result<()> {
            for id in (0..=root_id).rev() {
                if !reachable[id] {
                    continue;
                }
                let Some(grad) = grads[id].clone() else { continue };
                // clone out what the vjp needs so the borrow does not live
                // across op construction
                let (op, parents) = {
                    let inner = self.inner.borrow();
                    let node = &inner.nodes[id];
                    (node.op.clone(), node.parents.clone())
                };
                if matches!(op, Op::Leaf) {
                    continue;
                }
                let input_grads = op.vjp(&grad, self)?;
                debug_assert_eq!(input_grads.len(), parents.len());
                for (p, g) in parents.iter().zip(input_grads) {
                    let (Some(p), Some(g)) = (p, g) else { continue };
                    match grads[*p].take() {
                        None => grads[*p] = Some(g),
                        Some(old) => grads[*p] = Some(old.add(&g)?),
                    }
                }
            }
            Ok(())
        })();
        self.inner.borrow_mut().grad_enabled = was_enabled;
        sweep?;

        if !create_graph {
            self.inner.borrow_mut().consumed = true;
        }
        Ok(Gradients { grads })
    }
}

/// Gradients keyed by tape node, produced by one backward sweep.
pub struct Gradients<T: Elem> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Elem> std::fmt::Debug for Gradients<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Gradients({} populated)", self.grads.iter().filter(|g| g.is_some()).count())
    }
}

impl<T: Elem> Gradients<T> {
    /// Gradient w.r.t. a tensor that participated in the forward pass.
    pub fn wrt(&self, t: &Tensor<T>) -> Option<&Tensor<T>> {
        let id = t.node_id()?;
        self.grads.get(id).and_then(|g| g.as_ref())
    }
}
