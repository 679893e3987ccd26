//! The operator basis: forward evaluation, tape recording, and
//! vector-Jacobian products expressed through the same ops so that one more
//! level of differentiation works wherever the derivative chain is defined.

use std::rc::Rc;

use super::elem::Elem;
use super::tape::{Node, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::mesh::SparseMat;

/// Input snapshot stored on a node: buffer, shape, and originating node id.
pub(crate) struct Saved<T: Elem> {
    data: Rc<Vec<T>>,
    shape: Vec<usize>,
    node: Option<usize>,
}

impl<T: Elem> Clone for Saved<T> {
    fn clone(&self) -> Self {
        Saved { data: self.data.clone(), shape: self.shape.clone(), node: self.node }
    }
}

impl<T: Elem> Saved<T> {
    fn of(t: &Tensor<T>, tape: &Tape<T>) -> Self {
        Saved { data: t.data.clone(), shape: t.shape.clone(), node: t.node_id_on(tape) }
    }

    /// Rebuilds a usable handle; reattaching the node keeps gradient flowing
    /// through vjp expressions when the sweep is recorded.
    fn tensor(&self, tape: &Tape<T>) -> Tensor<T> {
        match self.node {
            Some(id) => Tensor::tracked(self.data.clone(), self.shape.clone(), tape.clone(), id),
            None => Tensor { data: self.data.clone(), shape: self.shape.clone(), node: None },
        }
    }

    fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    fn cols(&self) -> usize {
        if self.shape.len() < 2 {
            1
        } else {
            self.shape[1..].iter().product()
        }
    }
}

#[derive(Clone)]
pub(crate) enum Op<T: Elem> {
    Leaf,
    Add(Saved<T>, Saved<T>),
    Sub(Saved<T>, Saved<T>),
    Mul(Saved<T>, Saved<T>),
    ScalarMul(Saved<T>, T),
    AddScalar(Saved<T>),
    Matmul { a: Saved<T>, b: Saved<T>, ta: bool, tb: bool },
    GatherRows { x: Saved<T>, idx: Rc<Vec<usize>> },
    ScatterAddRows { x: Saved<T>, idx: Rc<Vec<usize>> },
    Reshape(Saved<T>),
    SumAxis0(Saved<T>),
    SumAxis1(Saved<T>),
    SumAll(Saved<T>),
    Fill { x: Saved<T> },
    BroadcastRows { x: Saved<T> },
    BroadcastCols { x: Saved<T> },
    SegmentSum { x: Saved<T>, block: usize },
    RepeatRows { x: Saved<T>, times: usize },
    TileRows { x: Saved<T>, times: usize },
    FoldRows { x: Saved<T>, times: usize },
    Unary { x: Saved<T>, f: UnaryFn },
    Concat { xs: Vec<Saved<T>>, axis: usize },
    Slice { x: Saved<T>, axis: usize, start: usize },
    Pad { x: Saved<T>, axis: usize, start: usize },
    SparseApply { x: Saved<T>, mat: Rc<SparseMat>, transpose: bool, batch: usize },
}

/// Elementwise functions with an explicit derivative chain. A `None`
/// derivative means one more differentiation level is unsupported and is
/// rejected by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryFn {
    Relu,
    ReluGrad,
    Elu,
    EluGrad,
    EluGradGrad,
    Sigmoid,
    SigmoidGrad,
    SigmoidGrad2,
    Softplus,
    Log,
    Recip,
    NegRecipSq,
    Sqrt,
    HalfRecipSqrt,
    Abs,
    Sign,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Relu => "relu",
            UnaryFn::ReluGrad => "relu_grad",
            UnaryFn::Elu => "elu",
            UnaryFn::EluGrad => "elu_grad",
            UnaryFn::EluGradGrad => "elu_grad_grad",
            UnaryFn::Sigmoid => "sigmoid",
            UnaryFn::SigmoidGrad => "sigmoid_grad",
            UnaryFn::SigmoidGrad2 => "sigmoid_grad2",
            UnaryFn::Softplus => "softplus",
            UnaryFn::Log => "log",
            UnaryFn::Recip => "recip",
            UnaryFn::NegRecipSq => "neg_recip_sq",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::HalfRecipSqrt => "half_recip_sqrt",
            UnaryFn::Abs => "abs",
            UnaryFn::Sign => "sign",
        }
    }

    fn deriv(self) -> Option<UnaryFn> {
        match self {
            UnaryFn::Relu => Some(UnaryFn::ReluGrad),
            UnaryFn::Elu => Some(UnaryFn::EluGrad),
            UnaryFn::EluGrad => Some(UnaryFn::EluGradGrad),
            UnaryFn::Sigmoid => Some(UnaryFn::SigmoidGrad),
            UnaryFn::SigmoidGrad => Some(UnaryFn::SigmoidGrad2),
            UnaryFn::Softplus => Some(UnaryFn::Sigmoid),
            UnaryFn::Log => Some(UnaryFn::Recip),
            UnaryFn::Recip => Some(UnaryFn::NegRecipSq),
            UnaryFn::Sqrt => Some(UnaryFn::HalfRecipSqrt),
            UnaryFn::Abs => Some(UnaryFn::Sign),
            UnaryFn::ReluGrad
            | UnaryFn::EluGradGrad
            | UnaryFn::SigmoidGrad2
            | UnaryFn::NegRecipSq
            | UnaryFn::HalfRecipSqrt
            | UnaryFn::Sign => None,
        }
    }

    fn eval<T: Elem>(self, x: T) -> T {
        let zero = T::zero();
        let one = T::one();
        match self {
            UnaryFn::Relu => {
                if x > zero {
                    x
                } else {
                    zero
                }
            }
            UnaryFn::ReluGrad => {
                if x > zero {
                    one
                } else {
                    zero
                }
            }
            UnaryFn::Elu => {
                if x > zero {
                    x
                } else {
                    x.exp() - one
                }
            }
            UnaryFn::EluGrad => {
                if x > zero {
                    one
                } else {
                    x.exp()
                }
            }
            UnaryFn::EluGradGrad => {
                if x > zero {
                    zero
                } else {
                    x.exp()
                }
            }
            UnaryFn::Sigmoid => sigmoid(x),
            UnaryFn::SigmoidGrad => {
                let s = sigmoid(x);
                s * (one - s)
            }
            UnaryFn::SigmoidGrad2 => {
                let s = sigmoid(x);
                s * (one - s) * (one - (s + s))
            }
            UnaryFn::Softplus => {
                // max(x, 0) + ln(1 + exp(-|x|))
                let m = if x > zero { x } else { zero };
                m + (one + (-x.abs()).exp()).ln()
            }
            UnaryFn::Log => x.ln(),
            UnaryFn::Recip => one / x,
            UnaryFn::NegRecipSq => -one / (x * x),
            UnaryFn::Sqrt => x.sqrt(),
            UnaryFn::HalfRecipSqrt => T::from_f64(0.5) / x.sqrt(),
            UnaryFn::Abs => x.abs(),
            UnaryFn::Sign => {
                if x > zero {
                    one
                } else if x < zero {
                    -one
                } else {
                    zero
                }
            }
        }
    }
}

fn sigmoid<T: Elem>(x: T) -> T {
    let one = T::one();
    if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

#[allow(dead_code)]
impl<T: Elem> Op<T> {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::ScalarMul(..) => "scalar_mul",
            Op::AddScalar(..) => "add_scalar",
            Op::Matmul { .. } => "matmul",
            Op::GatherRows { .. } => "gather_rows",
            Op::ScatterAddRows { .. } => "scatter_add_rows",
            Op::Reshape(..) => "reshape",
            Op::SumAxis0(..) => "sum_axis0",
            Op::SumAxis1(..) => "sum_axis1",
            Op::SumAll(..) => "sum_all",
            Op::Fill { .. } => "fill",
            Op::BroadcastRows { .. } => "broadcast_rows",
            Op::BroadcastCols { .. } => "broadcast_cols",
            Op::SegmentSum { .. } => "segment_sum",
            Op::RepeatRows { .. } => "repeat_rows",
            Op::TileRows { .. } => "tile_rows",
            Op::FoldRows { .. } => "fold_rows",
            Op::Unary { f, .. } => f.name(),
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Pad { .. } => "pad",
            Op::SparseApply { .. } => "sparse_apply",
        }
    }

    /// Gradients w.r.t. each saved input, aligned with the node's parents.
    pub(crate) fn vjp(&self, g: &Tensor<T>, tape: &Tape<T>) -> Result<Vec<Option<Tensor<T>>>> {
        Ok(match self {
            Op::Leaf => vec![],
            Op::Add(..) => vec![Some(g.clone()), Some(g.clone())],
            Op::Sub(..) => vec![Some(g.clone()), Some(g.scalar_mul(-T::one())?)],
            Op::Mul(a, b) => {
                let ga = g.mul(&b.tensor(tape))?;
                let gb = g.mul(&a.tensor(tape))?;
                vec![Some(ga), Some(gb)]
            }
            Op::ScalarMul(_, k) => vec![Some(g.scalar_mul(*k)?)],
            Op::AddScalar(_) => vec![Some(g.clone())],
            Op::Matmul { a, b, ta, tb } => {
                let at = a.tensor(tape);
                let bt = b.tensor(tape);
                let ga = if !*ta {
                    matmul_flags(g, &bt, false, !*tb)?
                } else {
                    matmul_flags(&bt, g, *tb, true)?
                };
                let gb = if !*tb {
                    matmul_flags(&at, g, !*ta, false)?
                } else {
                    matmul_flags(g, &at, true, *ta)?
                };
                vec![Some(ga), Some(gb)]
            }
            Op::GatherRows { x, idx } => {
                vec![Some(scatter_add_rows(g, idx.clone(), x.rows())?)]
            }
            Op::ScatterAddRows { idx, .. } => vec![Some(gather_rows_rc(g, idx.clone())?)],
            Op::Reshape(x) => vec![Some(g.reshape(x.shape.clone())?)],
            Op::SumAxis0(x) => vec![Some(broadcast_rows(g, x.rows())?)],
            Op::SumAxis1(x) => vec![Some(broadcast_cols(g, x.cols())?)],
            Op::SumAll(x) => vec![Some(fill(g, x.shape.clone())?)],
            Op::Fill { .. } => vec![Some(g.sum_all()?)],
            Op::BroadcastRows { .. } => vec![Some(g.sum_axis0()?)],
            Op::BroadcastCols { .. } => vec![Some(g.sum_axis1()?)],
            Op::SegmentSum { block, .. } => vec![Some(repeat_rows(g, *block)?)],
            Op::RepeatRows { times, .. } => vec![Some(segment_sum(g, *times)?)],
            Op::TileRows { times, .. } => vec![Some(fold_rows(g, *times)?)],
            Op::FoldRows { times, .. } => vec![Some(tile_rows(g, *times)?)],
            Op::Unary { x, f } => {
                let d = f
                    .deriv()
                    .ok_or(Error::SecondOrderUnsupported(f.name()))?;
                let dx = unary(&x.tensor(tape), d)?;
                vec![Some(g.mul(&dx)?)]
            }
            Op::Concat { xs, axis } => {
                let mut out = Vec::with_capacity(xs.len());
                let mut at = 0usize;
                for x in xs {
                    let len = if *axis == 0 { x.rows() } else { x.cols() };
                    out.push(Some(slice(g, *axis, at, len)?));
                    at += len;
                }
                out
            }
            Op::Slice { x, axis, start } => {
                let total = if *axis == 0 { x.rows() } else { x.cols() };
                vec![Some(pad(g, *axis, *start, total)?)]
            }
            Op::Pad { x, axis, start } => {
                let len = if *axis == 0 { x.rows() } else { x.cols() };
                vec![Some(slice(g, *axis, *start, len)?)]
            }
            Op::SparseApply { mat, transpose, batch, .. } => {
                vec![Some(sparse_apply(g, mat.clone(), !*transpose, *batch)?)]
            }
        })
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

/// Records the op if any tracked input's tape is currently recording.
fn build<T: Elem>(
    inputs: &[&Tensor<T>],
    data: Vec<T>,
    shape: Vec<usize>,
    make: impl FnOnce(&Tape<T>) -> Op<T>,
) -> Tensor<T> {
    let tape = inputs.iter().find_map(|t| t.tape());
    if let Some(tape) = tape {
        debug_assert!(
            inputs.iter().all(|t| t.tape().is_none_or(|tp| tp.same_tape(tape))),
            "operands from different tapes"
        );
        if tape.grad_enabled() {
            let tape = tape.clone();
            let op = make(&tape);
            let parents = op_parents(&op);
            let id = tape.push(Node { op, parents });
            return Tensor::tracked(Rc::new(data), shape, tape, id);
        }
    }
    Tensor::from_vec(data, shape)
}

fn op_parents<T: Elem>(op: &Op<T>) -> Vec<Option<usize>> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![a.node, b.node],
        Op::Matmul { a, b, .. } => vec![a.node, b.node],
        Op::ScalarMul(x, _)
        | Op::AddScalar(x)
        | Op::Reshape(x)
        | Op::SumAxis0(x)
        | Op::SumAxis1(x)
        | Op::SumAll(x) => vec![x.node],
        Op::Fill { x, .. }
        | Op::GatherRows { x, .. }
        | Op::ScatterAddRows { x, .. }
        | Op::BroadcastRows { x, .. }
        | Op::BroadcastCols { x, .. }
        | Op::SegmentSum { x, .. }
        | Op::RepeatRows { x, .. }
        | Op::TileRows { x, .. }
        | Op::FoldRows { x, .. }
        | Op::Unary { x, .. }
        | Op::Slice { x, .. }
        | Op::Pad { x, .. }
        | Op::SparseApply { x, .. } => vec![x.node],
        Op::Concat { xs, .. } => xs.iter().map(|x| x.node).collect(),
    }
}

fn same_shape<T: Elem>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape != b.shape {
        return Err(shape_err(op, format!("{:?} vs {:?}", a.shape, b.shape)));
    }
    Ok(())
}

pub fn add<T: Elem>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("add", a, b)?;
    let data = a.data.iter().zip(b.data.iter()).map(|(&x, &y)| x + y).collect();
    Ok(build(&[a, b], data, a.shape.clone(), |t| {
        Op::Add(Saved::of(a, t), Saved::of(b, t))
    }))
}

pub fn sub<T: Elem>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("sub", a, b)?;
    let data = a.data.iter().zip(b.data.iter()).map(|(&x, &y)| x - y).collect();
    Ok(build(&[a, b], data, a.shape.clone(), |t| {
        Op::Sub(Saved::of(a, t), Saved::of(b, t))
    }))
}

pub fn mul<T: Elem>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("mul", a, b)?;
    let data = a.data.iter().zip(b.data.iter()).map(|(&x, &y)| x * y).collect();
    Ok(build(&[a, b], data, a.shape.clone(), |t| {
        Op::Mul(Saved::of(a, t), Saved::of(b, t))
    }))
}

pub fn scalar_mul<T: Elem>(a: &Tensor<T>, k: T) -> Result<Tensor<T>> {
    let data = a.data.iter().map(|&x| x * k).collect();
    Ok(build(&[a], data, a.shape.clone(), |t| Op::ScalarMul(Saved::of(a, t), k)))
}

pub fn add_scalar<T: Elem>(a: &Tensor<T>, k: T) -> Result<Tensor<T>> {
    let data = a.data.iter().map(|&x| x + k).collect();
    Ok(build(&[a], data, a.shape.clone(), |t| Op::AddScalar(Saved::of(a, t))))
}

pub fn matmul<T: Elem>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    matmul_flags(a, b, false, false)
}

/// C = op(A) * op(B) where the flags transpose the operands logically
/// (strided gemm, no materialization).
pub fn matmul_flags<T: Elem>(a: &Tensor<T>, b: &Tensor<T>, ta: bool, tb: bool) -> Result<Tensor<T>> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(shape_err("matmul", format!("{:?} x {:?} (rank 2 required)", a.shape, b.shape)));
    }
    let (ar, ac) = (a.shape[0], a.shape[1]);
    let (br, bc) = (b.shape[0], b.shape[1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (kb, n) = if tb { (bc, br) } else { (br, bc) };
    if k != kb {
        return Err(shape_err(
            "matmul",
            format!("{:?}{} x {:?}{}", a.shape, if ta { "^T" } else { "" }, b.shape, if tb { "^T" } else { "" }),
        ));
    }
    let mut data = vec![T::zero(); m * n];
    if m > 0 && n > 0 && k > 0 {
        let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
        let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
        unsafe {
            T::gemm(
                m,
                k,
                n,
                T::one(),
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                T::zero(),
                data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Ok(build(&[a, b], data, vec![m, n], |t| Op::Matmul {
        a: Saved::of(a, t),
        b: Saved::of(b, t),
        ta,
        tb,
    }))
}

pub fn gather_rows<T: Elem>(x: &Tensor<T>, idx: &[usize]) -> Result<Tensor<T>> {
    gather_rows_rc(x, Rc::new(idx.to_vec()))
}

pub fn gather_rows_rc<T: Elem>(x: &Tensor<T>, idx: Rc<Vec<usize>>) -> Result<Tensor<T>> {
    if x.rank() == 0 {
        return Err(shape_err("gather_rows", "scalar input".into()));
    }
    let rows = x.shape[0];
    let cols: usize = x.shape[1..].iter().product::<usize>().max(1);
    for &i in idx.iter() {
        if i >= rows {
            return Err(Error::GatherOutOfRange { index: i, rows });
        }
    }
    let mut data = Vec::with_capacity(idx.len() * cols);
    for &i in idx.iter() {
        data.extend_from_slice(&x.data[i * cols..(i + 1) * cols]);
    }
    let mut shape = x.shape.clone();
    shape[0] = idx.len();
    Ok(build(&[x], data, shape, |t| Op::GatherRows { x: Saved::of(x, t), idx: idx.clone() }))
}

/// Adjoint of gather: out[idx[r]] += x[r]; repeated indices accumulate.
pub fn scatter_add_rows<T: Elem>(x: &Tensor<T>, idx: Rc<Vec<usize>>, rows: usize) -> Result<Tensor<T>> {
    if x.rank() == 0 {
        return Err(shape_err("scatter_add_rows", "scalar input".into()));
    }
    if x.shape[0] != idx.len() {
        return Err(shape_err(
            "scatter_add_rows",
            format!("{} rows vs {} indices", x.shape[0], idx.len()),
        ));
    }
    let cols: usize = x.shape[1..].iter().product::<usize>().max(1);
    for &i in idx.iter() {
        if i >= rows {
            return Err(Error::GatherOutOfRange { index: i, rows });
        }
    }
    let mut data = vec![T::zero(); rows * cols];
    for (r, &i) in idx.iter().enumerate() {
        let src = &x.data[r * cols..(r + 1) * cols];
        let dst = &mut data[i * cols..(i + 1) * cols];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += *s;
        }
    }
    let mut shape = x.shape.clone();
    shape[0] = rows;
    Ok(build(&[x], data, shape, |t| Op::ScatterAddRows { x: Saved::of(x, t), idx: idx.clone() }))
}

pub fn reshape<T: Elem>(x: &Tensor<T>, shape: Vec<usize>) -> Result<Tensor<T>> {
    if shape.iter().product::<usize>() != x.numel() {
        return Err(shape_err("reshape", format!("{:?} -> {:?}", x.shape, shape)));
    }
    let data = x.data.as_ref().clone();
    Ok(build(&[x], data, shape, |t| Op::Reshape(Saved::of(x, t))))
}

fn require_rank2<T: Elem>(op: &'static str, x: &Tensor<T>) -> Result<(usize, usize)> {
    if x.rank() != 2 {
        return Err(shape_err(op, format!("rank-2 required, got {:?}", x.shape)));
    }
    Ok((x.shape[0], x.shape[1]))
}

pub fn sum_axis0<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("sum_axis0", x)?;
    let mut data = vec![T::zero(); c];
    for i in 0..r {
        for j in 0..c {
            data[j] += x.data[i * c + j];
        }
    }
    Ok(build(&[x], data, vec![c], |t| Op::SumAxis0(Saved::of(x, t))))
}

pub fn sum_axis1<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("sum_axis1", x)?;
    let mut data = vec![T::zero(); r];
    for i in 0..r {
        let mut acc = T::zero();
        for j in 0..c {
            acc += x.data[i * c + j];
        }
        data[i] = acc;
    }
    Ok(build(&[x], data, vec![r], |t| Op::SumAxis1(Saved::of(x, t))))
}

pub fn sum_all<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut acc = T::zero();
    for &v in x.data.iter() {
        acc += v;
    }
    Ok(build(&[x], vec![acc], vec![], |t| Op::SumAll(Saved::of(x, t))))
}

/// Broadcasts a scalar to a full shape (adjoint of sum_all).
pub fn fill<T: Elem>(x: &Tensor<T>, shape: Vec<usize>) -> Result<Tensor<T>> {
    if x.numel() != 1 {
        return Err(shape_err("fill", format!("scalar required, got {:?}", x.shape)));
    }
    let v = x.data[0];
    let n: usize = shape.iter().product();
    Ok(build(&[x], vec![v; n], shape, |t| Op::Fill { x: Saved::of(x, t) }))
}

pub fn broadcast_rows<T: Elem>(x: &Tensor<T>, rows: usize) -> Result<Tensor<T>> {
    if x.rank() != 1 {
        return Err(shape_err("broadcast_rows", format!("rank-1 required, got {:?}", x.shape)));
    }
    let c = x.shape[0];
    let mut data = Vec::with_capacity(rows * c);
    for _ in 0..rows {
        data.extend_from_slice(&x.data);
    }
    Ok(build(&[x], data, vec![rows, c], |t| Op::BroadcastRows { x: Saved::of(x, t) }))
}

pub fn broadcast_cols<T: Elem>(x: &Tensor<T>, cols: usize) -> Result<Tensor<T>> {
    if x.rank() != 1 {
        return Err(shape_err("broadcast_cols", format!("rank-1 required, got {:?}", x.shape)));
    }
    let r = x.shape[0];
    let mut data = Vec::with_capacity(r * cols);
    for i in 0..r {
        for _ in 0..cols {
            data.push(x.data[i]);
        }
    }
    Ok(build(&[x], data, vec![r, cols], |t| Op::BroadcastCols { x: Saved::of(x, t) }))
}

/// Sums consecutive row blocks: (B*block, C) -> (B, C).
pub fn segment_sum<T: Elem>(x: &Tensor<T>, block: usize) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("segment_sum", x)?;
    if block == 0 || r % block != 0 {
        return Err(shape_err("segment_sum", format!("{r} rows not divisible by block {block}")));
    }
    let b = r / block;
    let mut data = vec![T::zero(); b * c];
    for i in 0..r {
        let seg = i / block;
        for j in 0..c {
            data[seg * c + j] += x.data[i * c + j];
        }
    }
    Ok(build(&[x], data, vec![b, c], |t| Op::SegmentSum { x: Saved::of(x, t), block }))
}

/// Repeats each row `times` consecutive times: (B, C) -> (B*times, C).
pub fn repeat_rows<T: Elem>(x: &Tensor<T>, times: usize) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("repeat_rows", x)?;
    let mut data = Vec::with_capacity(r * times * c);
    for i in 0..r {
        for _ in 0..times {
            data.extend_from_slice(&x.data[i * c..(i + 1) * c]);
        }
    }
    Ok(build(&[x], data, vec![r * times, c], |t| Op::RepeatRows { x: Saved::of(x, t), times }))
}

/// Tiles the whole matrix `times` times: (V, C) -> (times*V, C).
pub fn tile_rows<T: Elem>(x: &Tensor<T>, times: usize) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("tile_rows", x)?;
    let mut data = Vec::with_capacity(r * times * c);
    for _ in 0..times {
        data.extend_from_slice(&x.data);
    }
    Ok(build(&[x], data, vec![times * r, c], |t| Op::TileRows { x: Saved::of(x, t), times }))
}

/// Sums `times` stacked copies back together: adjoint of tile_rows.
pub fn fold_rows<T: Elem>(x: &Tensor<T>, times: usize) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("fold_rows", x)?;
    if times == 0 || r % times != 0 {
        return Err(shape_err("fold_rows", format!("{r} rows not divisible by {times}")));
    }
    let v = r / times;
    let mut data = vec![T::zero(); v * c];
    for i in 0..r {
        let dst = i % v;
        for j in 0..c {
            data[dst * c + j] += x.data[i * c + j];
        }
    }
    Ok(build(&[x], data, vec![v, c], |t| Op::FoldRows { x: Saved::of(x, t), times }))
}

pub fn unary<T: Elem>(x: &Tensor<T>, f: UnaryFn) -> Result<Tensor<T>> {
    if f == UnaryFn::Log {
        for &v in x.data.iter() {
            if v <= T::zero() {
                return Err(Error::DomainError { op: "log", value: v.as_f64() });
            }
        }
    }
    if f == UnaryFn::Sqrt {
        for &v in x.data.iter() {
            if v < T::zero() {
                return Err(Error::DomainError { op: "sqrt", value: v.as_f64() });
            }
        }
    }
    let data = x.data.iter().map(|&v| f.eval(v)).collect();
    Ok(build(&[x], data, x.shape.clone(), |t| Op::Unary { x: Saved::of(x, t), f }))
}

pub fn concat<T: Elem>(xs: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    if xs.is_empty() {
        return Err(shape_err("concat", "no inputs".into()));
    }
    if axis > 1 {
        return Err(shape_err("concat", format!("axis {axis} out of range")));
    }
    let mut dims = Vec::with_capacity(xs.len());
    for x in xs {
        let (r, c) = require_rank2("concat", x)?;
        dims.push((r, c));
    }
    let (shape, data) = if axis == 0 {
        let c = dims[0].1;
        if dims.iter().any(|d| d.1 != c) {
            return Err(shape_err("concat", "column counts differ".into()));
        }
        let rows: usize = dims.iter().map(|d| d.0).sum();
        let mut data = Vec::with_capacity(rows * c);
        for x in xs {
            data.extend_from_slice(&x.data);
        }
        (vec![rows, c], data)
    } else {
        let r = dims[0].0;
        if dims.iter().any(|d| d.0 != r) {
            return Err(shape_err("concat", "row counts differ".into()));
        }
        let cols: usize = dims.iter().map(|d| d.1).sum();
        let mut data = Vec::with_capacity(r * cols);
        for i in 0..r {
            for (x, (_, c)) in xs.iter().zip(&dims) {
                data.extend_from_slice(&x.data[i * c..(i + 1) * c]);
            }
        }
        (vec![r, cols], data)
    };
    Ok(build(xs, data, shape, |t| Op::Concat {
        xs: xs.iter().map(|x| Saved::of(x, t)).collect(),
        axis,
    }))
}

pub fn slice<T: Elem>(x: &Tensor<T>, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("slice", x)?;
    let bound = if axis == 0 { r } else { c };
    if axis > 1 || start + len > bound {
        return Err(shape_err("slice", format!("[{start}..{}) on axis {axis} of {:?}", start + len, x.shape)));
    }
    let (shape, data) = if axis == 0 {
        (vec![len, c], x.data[start * c..(start + len) * c].to_vec())
    } else {
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&x.data[i * c + start..i * c + start + len]);
        }
        (vec![r, len], data)
    };
    Ok(build(&[x], data, shape, |t| Op::Slice { x: Saved::of(x, t), axis, start }))
}

/// Zero-embeds a block into a larger matrix along `axis` (adjoint of slice).
pub fn pad<T: Elem>(x: &Tensor<T>, axis: usize, start: usize, total: usize) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("pad", x)?;
    let len = if axis == 0 { r } else { c };
    if axis > 1 || start + len > total {
        return Err(shape_err("pad", format!("[{start}..{}) into {total} on axis {axis}", start + len)));
    }
    let (shape, data) = if axis == 0 {
        let mut data = vec![T::zero(); total * c];
        data[start * c..(start + r) * c].copy_from_slice(&x.data);
        (vec![total, c], data)
    } else {
        let mut data = vec![T::zero(); r * total];
        for i in 0..r {
            data[i * total + start..i * total + start + c].copy_from_slice(&x.data[i * c..(i + 1) * c]);
        }
        (vec![r, total], data)
    };
    Ok(build(&[x], data, shape, |t| Op::Pad { x: Saved::of(x, t), axis, start }))
}

/// Applies a sparse matrix per consecutive batch block:
/// (batch * in_rows, C) -> (batch * out_rows, C).
pub fn sparse_apply<T: Elem>(
    x: &Tensor<T>,
    mat: Rc<SparseMat>,
    transpose: bool,
    batch: usize,
) -> Result<Tensor<T>> {
    let (r, c) = require_rank2("sparse_apply", x)?;
    let (in_rows, out_rows) = if transpose { (mat.rows, mat.cols) } else { (mat.cols, mat.rows) };
    if r != batch * in_rows {
        return Err(shape_err(
            "sparse_apply",
            format!("{r} rows vs batch {batch} x {in_rows}"),
        ));
    }
    let mut data = vec![T::zero(); batch * out_rows * c];
    for s in 0..batch {
        let src = &x.data[s * in_rows * c..(s + 1) * in_rows * c];
        let dst = &mut data[s * out_rows * c..(s + 1) * out_rows * c];
        if transpose {
            mat.apply_transpose(src, c, dst);
        } else {
            mat.apply(src, c, dst);
        }
    }
    Ok(build(&[x], data, vec![batch * out_rows, c], |t| Op::SparseApply {
        x: Saved::of(x, t),
        mat: mat.clone(),
        transpose,
        batch,
    }))
}

// --- composites -----------------------------------------------------------

pub fn mean_all<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = x.numel();
    scalar_mul(&sum_all(x)?, T::one() / T::from_f64(n as f64))
}

pub fn mean_axis0<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let r = x.shape()[0];
    scalar_mul(&sum_axis0(x)?, T::one() / T::from_f64(r as f64))
}

pub fn mean_axis1<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let c = x.shape()[1];
    scalar_mul(&sum_axis1(x)?, T::one() / T::from_f64(c as f64))
}

/// Sum of absolute values.
pub fn l1_norm<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    sum_all(&unary(x, UnaryFn::Abs)?)
}

/// Mean of absolute values (per-element normalized L1).
pub fn mean_abs<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    mean_all(&unary(x, UnaryFn::Abs)?)
}

/// Sum of squares.
pub fn squared_l2<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    sum_all(&mul(x, x)?)
}

pub fn l2_norm<T: Elem>(x: &Tensor<T>) -> Result<Tensor<T>> {
    unary(&squared_l2(x)?, UnaryFn::Sqrt)
}

impl<T: Elem> Tensor<T> {
    pub fn add(&self, o: &Tensor<T>) -> Result<Tensor<T>> {
        add(self, o)
    }
    pub fn sub(&self, o: &Tensor<T>) -> Result<Tensor<T>> {
        sub(self, o)
    }
    pub fn mul(&self, o: &Tensor<T>) -> Result<Tensor<T>> {
        mul(self, o)
    }
    pub fn scalar_mul(&self, k: T) -> Result<Tensor<T>> {
        scalar_mul(self, k)
    }
    pub fn add_scalar(&self, k: T) -> Result<Tensor<T>> {
        add_scalar(self, k)
    }
    pub fn matmul(&self, o: &Tensor<T>) -> Result<Tensor<T>> {
        matmul(self, o)
    }
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor<T>> {
        reshape(self, shape)
    }
    pub fn sum_axis0(&self) -> Result<Tensor<T>> {
        sum_axis0(self)
    }
    pub fn sum_axis1(&self) -> Result<Tensor<T>> {
        sum_axis1(self)
    }
    pub fn sum_all(&self) -> Result<Tensor<T>> {
        sum_all(self)
    }
    pub fn mean_all(&self) -> Result<Tensor<T>> {
        mean_all(self)
    }
    pub fn relu(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Relu)
    }
    pub fn elu(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Elu)
    }
    pub fn sigmoid(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Sigmoid)
    }
    pub fn softplus(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Softplus)
    }
    pub fn log(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Log)
    }
    pub fn sqrt(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Sqrt)
    }
    pub fn abs(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Abs)
    }
    pub fn recip(&self) -> Result<Tensor<T>> {
        unary(self, UnaryFn::Recip)
    }
}
