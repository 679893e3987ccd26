//! Dense tensor handle: a shared buffer, a shape, and an optional tape node.

use std::rc::Rc;

use super::elem::Elem;
use super::tape::Tape;

pub struct Tensor<T: Elem> {
    pub(crate) data: Rc<Vec<T>>,
    pub(crate) shape: Vec<usize>,
    pub(crate) node: Option<NodeRef<T>>,
}

pub(crate) struct NodeRef<T: Elem> {
    pub(crate) tape: Tape<T>,
    pub(crate) id: usize,
}

impl<T: Elem> Clone for NodeRef<T> {
    fn clone(&self) -> Self {
        NodeRef { tape: self.tape.clone(), id: self.id }
    }
}

impl<T: Elem> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor { data: self.data.clone(), shape: self.shape.clone(), node: self.node.clone() }
    }
}

impl<T: Elem> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("tracked", &self.node.is_some())
            .finish()
    }
}

impl<T: Elem> Tensor<T> {
    /// Untracked constant.
    pub fn from_vec(data: Vec<T>, shape: Vec<usize>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/buffer mismatch");
        Tensor { data: Rc::new(data), shape, node: None }
    }

    pub fn scalar(v: T) -> Self {
        Tensor::from_vec(vec![v], vec![])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor::from_vec(vec![T::zero(); n], shape)
    }

    pub fn from_f64_slice(data: &[f64], shape: Vec<usize>) -> Self {
        Tensor::from_vec(data.iter().map(|&v| T::from_f64(v)).collect(), shape)
    }

    pub(crate) fn tracked(data: Rc<Vec<T>>, shape: Vec<usize>, tape: Tape<T>, id: usize) -> Self {
        Tensor { data, shape, node: Some(NodeRef { tape, id }) }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Row/column view of rank <= 2 tensors: scalars are (1, 1), vectors
    /// (n, 1) columns for gather purposes, matrices as-is.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn scalar_value(&self) -> T {
        assert_eq!(self.numel(), 1, "not a scalar");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same buffer, no tape node: gradient never flows into a detached view.
    pub fn detach(&self) -> Tensor<T> {
        Tensor { data: self.data.clone(), shape: self.shape.clone(), node: None }
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    pub(crate) fn node_id(&self) -> Option<usize> {
        self.node.as_ref().map(|n| n.id)
    }

    pub(crate) fn node_id_on(&self, tape: &Tape<T>) -> Option<usize> {
        self.node.as_ref().filter(|n| n.tape.same_tape(tape)).map(|n| n.id)
    }

    pub(crate) fn tape(&self) -> Option<&Tape<T>> {
        self.node.as_ref().map(|n| &n.tape)
    }
}
