//! Spiral convolution, linear layers, and MLPs.

use super::{BatchTopo, ParamBind};
use crate::autodiff::{kaiming_init, ops, Elem, ParamSet, Parameter, Tensor, UnaryFn};
use crate::error::Result;
use crate::rng::SeedStream;

/// Per-vertex linear map over the concatenated features of the vertex's
/// spiral sequence: gather L spiral rows, flatten, apply (L*C_in, C_out).
pub struct SpiralConv {
    pub weight: usize,
    pub bias: usize,
    pub level: usize,
    pub length: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl SpiralConv {
    pub fn init<T: Elem>(
        params: &mut ParamSet<T>,
        seeds: &SeedStream,
        name: &str,
        level: usize,
        length: usize,
        c_in: usize,
        c_out: usize,
    ) -> Self {
        let fan_in = length * c_in;
        let w = kaiming_init::<T>(vec![fan_in, c_out], fan_in, seeds, &format!("{name}.weight"));
        let weight = params.insert(Parameter::new(
            format!("{name}.weight"),
            w.values().to_vec(),
            vec![fan_in, c_out],
        ));
        let bias = params.insert(Parameter::new(
            format!("{name}.bias"),
            vec![T::zero(); c_out],
            vec![c_out],
        ));
        SpiralConv { weight, bias, level, length, c_in, c_out }
    }

    pub fn forward<T: Elem>(
        &self,
        bind: &ParamBind<'_, T>,
        x: &Tensor<T>,
        topo: &BatchTopo,
    ) -> Result<Tensor<T>> {
        let rows = topo.rows_at(self.level);
        if x.shape() != [rows, self.c_in] {
            return Err(crate::Error::ShapeMismatch {
                op: "spiral_conv",
                detail: format!(
                    "input {:?}, expected [{rows}, {}] at level {}",
                    x.shape(),
                    self.c_in,
                    self.level
                ),
            });
        }
        let gathered = ops::gather_rows_rc(x, topo.table(self.level))?;
        let flat = gathered.reshape(vec![rows, self.length * self.c_in])?;
        let w = bind.get(self.weight);
        let b = bind.get(self.bias);
        flat.matmul(&w)?.add(&ops::broadcast_rows(&b, rows)?)
    }
}

pub struct Linear {
    pub weight: usize,
    pub bias: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl Linear {
    pub fn init<T: Elem>(
        params: &mut ParamSet<T>,
        seeds: &SeedStream,
        name: &str,
        c_in: usize,
        c_out: usize,
    ) -> Self {
        let w = kaiming_init::<T>(vec![c_in, c_out], c_in, seeds, &format!("{name}.weight"));
        let weight = params.insert(Parameter::new(
            format!("{name}.weight"),
            w.values().to_vec(),
            vec![c_in, c_out],
        ));
        let bias = params.insert(Parameter::new(
            format!("{name}.bias"),
            vec![T::zero(); c_out],
            vec![c_out],
        ));
        Linear { weight, bias, c_in, c_out }
    }

    pub fn forward<T: Elem>(&self, bind: &ParamBind<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let rows = x.shape()[0];
        let w = bind.get(self.weight);
        let b = bind.get(self.bias);
        x.matmul(&w)?.add(&ops::broadcast_rows(&b, rows)?)
    }
}

/// Fully connected stack; hidden layers use the given activation, the last
/// layer is linear unless `final_activation` says otherwise.
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub hidden_activation: UnaryFn,
    pub final_activation: Option<UnaryFn>,
}

impl Mlp {
    pub fn init<T: Elem>(
        params: &mut ParamSet<T>,
        seeds: &SeedStream,
        name: &str,
        sizes: &[usize],
        hidden_activation: UnaryFn,
        final_activation: Option<UnaryFn>,
    ) -> Self {
        assert!(sizes.len() >= 2, "mlp needs at least input and output sizes");
        let layers = (0..sizes.len() - 1)
            .map(|i| Linear::init(params, seeds, &format!("{name}.fc{i}"), sizes[i], sizes[i + 1]))
            .collect();
        Mlp { layers, hidden_activation, final_activation }
    }

    pub fn forward<T: Elem>(&self, bind: &ParamBind<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(bind, &h)?;
            if i < last {
                h = ops::unary(&h, self.hidden_activation)?;
            } else if let Some(f) = self.final_activation {
                h = ops::unary(&h, f)?;
            }
        }
        Ok(h)
    }
}
