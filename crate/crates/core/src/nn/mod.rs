//! Network layers: spiral convolution, instance/adaptive-instance
//! normalization, the Spiral blocks, and plain MLPs.
//!
//! Forward passes run on vertically stacked batches: a batch of B meshes at
//! level l is one (B * V_l, C) tensor, and every per-sample statistic goes
//! through block-segment ops so samples never mix.

mod blocks;
mod layers;
mod norm;

pub use blocks::{BlockConfig, Norm, Resample, SpiralBlock, SpiralResBlock, StyleParams};
pub use layers::{Linear, Mlp, SpiralConv};
pub use norm::{adain, instance_norm, NORM_EPS};

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::autodiff::{Elem, ParamSet, Tape, Tensor};
use crate::mesh::{SparseMat, TopologyAssets};

/// Batched topology context: spiral tables with per-sample offsets, plus the
/// sampling matrices, for a fixed batch size.
pub struct BatchTopo {
    pub batch: usize,
    pub sizes: Vec<usize>,
    tables: Vec<Rc<Vec<usize>>>,
    downs: Vec<Rc<SparseMat>>,
    ups: Vec<Rc<SparseMat>>,
}

impl BatchTopo {
    pub fn new(assets: &TopologyAssets, batch: usize) -> Self {
        assert!(batch >= 1);
        let mut tables = Vec::with_capacity(assets.levels.len());
        for lv in &assets.levels {
            let v = lv.v_count;
            let t = &lv.spirals;
            let mut idx = Vec::with_capacity(batch * t.indices.len());
            for b in 0..batch {
                let off = b * v;
                idx.extend(t.indices.iter().map(|&i| i + off));
            }
            tables.push(Rc::new(idx));
        }
        BatchTopo {
            batch,
            sizes: assets.level_sizes(),
            tables,
            downs: assets.down.iter().map(|m| Rc::new(m.clone())).collect(),
            ups: assets.up.iter().map(|m| Rc::new(m.clone())).collect(),
        }
    }

    pub fn table(&self, level: usize) -> Rc<Vec<usize>> {
        self.tables[level].clone()
    }

    /// Matrix pooling level -> level+1.
    pub fn down_mat(&self, level: usize) -> Rc<SparseMat> {
        self.downs[level].clone()
    }

    /// Matrix un-pooling level+1 -> level.
    pub fn up_mat(&self, level: usize) -> Rc<SparseMat> {
        self.ups[level].clone()
    }

    pub fn rows_at(&self, level: usize) -> usize {
        self.batch * self.sizes[level]
    }
}

/// Resolves parameter indices to tape-bound leaves, one leaf per parameter
/// per step so repeated layer calls accumulate into a single gradient.
pub struct ParamBind<'a, T: Elem> {
    set: &'a ParamSet<T>,
    tape: Option<&'a Tape<T>>,
    cache: RefCell<HashMap<usize, Tensor<T>>>,
}

impl<'a, T: Elem> ParamBind<'a, T> {
    /// Trainable binding: parameters become tracked leaves.
    pub fn trainable(set: &'a ParamSet<T>, tape: &'a Tape<T>) -> Self {
        ParamBind { set, tape: Some(tape), cache: Default::default() }
    }

    /// Frozen binding: parameters are constants, no gradient flows to them.
    pub fn frozen(set: &'a ParamSet<T>) -> Self {
        ParamBind { set, tape: None, cache: Default::default() }
    }

    pub fn get(&self, idx: usize) -> Tensor<T> {
        if let Some(t) = self.cache.borrow().get(&idx) {
            return t.clone();
        }
        let p = self.set.get(idx);
        let tensor = match self.tape {
            Some(tape) => p.bind(tape),
            None => p.constant(),
        };
        self.cache.borrow_mut().insert(idx, tensor.clone());
        tensor
    }

    /// (parameter index, bound leaf) pairs for gradient extraction.
    pub fn bound(&self) -> Vec<(usize, Tensor<T>)> {
        let cache = self.cache.borrow();
        let mut out: Vec<_> = cache.iter().map(|(k, v)| (*k, v.clone())).collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }
}
