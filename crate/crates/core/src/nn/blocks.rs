//! SpiralBlock and SpiralResBlock.
//!
//! A SpiralBlock applies, in order: optional up-sampling, spiral conv,
//! normalization, ELU, optional down-sampling. The res variant stacks two
//! conv/norm/ELU stages and adds a skip path (a per-vertex linear projection
//! when channel counts differ).

use super::layers::{Linear, SpiralConv};
use super::norm::{adain, instance_norm};
use super::{BatchTopo, ParamBind};
use crate::autodiff::{ops, Elem, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    None,
    Instance,
    AdaIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    None,
    Down,
    Up,
}

/// `level` is the resolution the convolution runs at; `Down` pools the
/// output to level+1, `Up` un-pools the input from level+1 first.
#[derive(Debug, Clone, Copy)]
pub struct BlockConfig {
    pub c_in: usize,
    pub c_out: usize,
    pub norm: Norm,
    pub resample: Resample,
    pub level: usize,
}

impl BlockConfig {
    pub fn in_level(&self) -> usize {
        match self.resample {
            Resample::Up => self.level + 1,
            _ => self.level,
        }
    }

    pub fn out_level(&self) -> usize {
        match self.resample {
            Resample::Down => self.level + 1,
            _ => self.level,
        }
    }
}

/// Per-site AdaIN parameters, (B, C) each.
pub struct StyleParams<T: Elem> {
    pub mu: Tensor<T>,
    pub sigma: Tensor<T>,
}

pub struct SpiralBlock {
    pub conv: SpiralConv,
    pub cfg: BlockConfig,
}

impl SpiralBlock {
    pub fn init<T: Elem>(
        params: &mut ParamSet<T>,
        seeds: &SeedStream,
        name: &str,
        cfg: BlockConfig,
        spiral_length: usize,
    ) -> Self {
        let conv = SpiralConv::init(
            params,
            seeds,
            &format!("{name}.conv"),
            cfg.level,
            spiral_length,
            cfg.c_in,
            cfg.c_out,
        );
        SpiralBlock { conv, cfg }
    }

    /// Channel counts of the AdaIN sites, in application order.
    pub fn adain_sites(&self) -> Vec<usize> {
        match self.cfg.norm {
            Norm::AdaIn => vec![self.cfg.c_out],
            _ => vec![],
        }
    }

    pub fn forward<T: Elem>(
        &self,
        bind: &ParamBind<'_, T>,
        x: &Tensor<T>,
        topo: &BatchTopo,
        style: &[StyleParams<T>],
    ) -> Result<Tensor<T>> {
        check_style_count("spiral_block", self.cfg.norm, style.len(), 1)?;
        let mut h = x.clone();
        if self.cfg.resample == Resample::Up {
            h = ops::sparse_apply(&h, topo.up_mat(self.cfg.level), false, topo.batch)?;
        }
        h = self.conv.forward(bind, &h, topo)?;
        let v = topo.sizes[self.cfg.level];
        h = match self.cfg.norm {
            Norm::None => h,
            Norm::Instance => instance_norm(&h, v)?,
            Norm::AdaIn => adain(&h, v, &style[0].mu, &style[0].sigma)?,
        };
        h = h.elu()?;
        if self.cfg.resample == Resample::Down {
            h = ops::sparse_apply(&h, topo.down_mat(self.cfg.level), false, topo.batch)?;
        }
        Ok(h)
    }
}

pub struct SpiralResBlock {
    pub conv1: SpiralConv,
    pub conv2: SpiralConv,
    pub skip_proj: Option<Linear>,
    pub cfg: BlockConfig,
}

impl SpiralResBlock {
    pub fn init<T: Elem>(
        params: &mut ParamSet<T>,
        seeds: &SeedStream,
        name: &str,
        cfg: BlockConfig,
        spiral_length: usize,
    ) -> Self {
        assert!(
            cfg.resample == Resample::None,
            "res blocks do not resample"
        );
        let conv1 = SpiralConv::init(
            params,
            seeds,
            &format!("{name}.conv1"),
            cfg.level,
            spiral_length,
            cfg.c_in,
            cfg.c_out,
        );
        let conv2 = SpiralConv::init(
            params,
            seeds,
            &format!("{name}.conv2"),
            cfg.level,
            spiral_length,
            cfg.c_out,
            cfg.c_out,
        );
        let skip_proj = (cfg.c_in != cfg.c_out)
            .then(|| Linear::init(params, seeds, &format!("{name}.skip"), cfg.c_in, cfg.c_out));
        SpiralResBlock { conv1, conv2, skip_proj, cfg }
    }

    pub fn adain_sites(&self) -> Vec<usize> {
        match self.cfg.norm {
            Norm::AdaIn => vec![self.cfg.c_out, self.cfg.c_out],
            _ => vec![],
        }
    }

    pub fn forward<T: Elem>(
        &self,
        bind: &ParamBind<'_, T>,
        x: &Tensor<T>,
        topo: &BatchTopo,
        style: &[StyleParams<T>],
    ) -> Result<Tensor<T>> {
        check_style_count("spiral_res_block", self.cfg.norm, style.len(), 2)?;
        let v = topo.sizes[self.cfg.level];
        let norm_at = |h: &Tensor<T>, site: usize| -> Result<Tensor<T>> {
            match self.cfg.norm {
                Norm::None => Ok(h.clone()),
                Norm::Instance => instance_norm(h, v),
                Norm::AdaIn => adain(h, v, &style[site].mu, &style[site].sigma),
            }
        };
        let mut h = self.conv1.forward(bind, x, topo)?;
        h = norm_at(&h, 0)?.elu()?;
        h = self.conv2.forward(bind, &h, topo)?;
        h = norm_at(&h, 1)?.elu()?;
        let skip = match &self.skip_proj {
            Some(proj) => proj.forward(bind, x)?,
            None => x.clone(),
        };
        h.add(&skip)
    }
}

fn check_style_count(op: &'static str, norm: Norm, got: usize, want: usize) -> Result<()> {
    let want = if norm == Norm::AdaIn { want } else { 0 };
    if got != want {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("{got} style parameter sites provided, block takes {want}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::mesh::{icosphere, TopologyAssets};
    use crate::nn::NORM_EPS;

    fn topo2() -> (TopologyAssets, BatchTopo) {
        let m = icosphere(2, 10.0);
        let assets = TopologyAssets::build(&m, 2, 4, 9, 1).unwrap();
        let topo = BatchTopo::new(&assets, 1);
        (assets, topo)
    }

    #[test]
    fn zero_weights_give_constant_bias_after_elu() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(20);
        let cfg = BlockConfig { c_in: 3, c_out: 4, norm: Norm::None, resample: Resample::None, level: 0 };
        let block = SpiralBlock::init(&mut params, &seeds, "b", cfg, 9);
        let w = params.get_mut(block.conv.weight);
        *std::rc::Rc::make_mut(&mut w.data) = vec![0.0; w.numel()];
        let b = params.get_mut(block.conv.bias);
        *std::rc::Rc::make_mut(&mut b.data) = vec![1.5, -2.0, 0.0, 0.25];

        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec(vec![0.3; 162 * 3], vec![162, 3]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();
        let elu = |v: f64| if v > 0.0 { v } else { v.exp() - 1.0 };
        for row in y.values().chunks(4) {
            for (got, bias) in row.iter().zip([1.5, -2.0, 0.0, 0.25]) {
                assert!((got - elu(bias)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn down_block_quarters_vertex_dimension() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(21);
        let cfg = BlockConfig { c_in: 3, c_out: 4, norm: Norm::Instance, resample: Resample::Down, level: 0 };
        let block = SpiralBlock::init(&mut params, &seeds, "b", cfg, 9);
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec((0..162 * 3).map(|i| (i as f64).sin()).collect(), vec![162, 3]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();
        assert_eq!(y.shape(), &[41, 4]); // ceil(162/4)
    }

    #[test]
    fn up_block_restores_fine_vertex_dimension() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(22);
        let cfg = BlockConfig { c_in: 2, c_out: 3, norm: Norm::None, resample: Resample::Up, level: 0 };
        let block = SpiralBlock::init(&mut params, &seeds, "b", cfg, 9);
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec(vec![0.5; 41 * 2], vec![41, 2]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();
        assert_eq!(y.shape(), &[162, 3]);
    }

    #[test]
    fn block_matches_explicit_composition() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(23);
        let cfg = BlockConfig { c_in: 3, c_out: 4, norm: Norm::Instance, resample: Resample::Down, level: 0 };
        let block = SpiralBlock::init(&mut params, &seeds, "b", cfg, 9);
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec((0..162 * 3).map(|i| (i as f64 * 0.01).cos()).collect(), vec![162, 3]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();

        let composed = {
            let conv = block.conv.forward(&bind, &x, &topo).unwrap();
            let normed = instance_norm(&conv, 162).unwrap();
            let act = normed.elu().unwrap();
            ops::sparse_apply(&act, topo.down_mat(0), false, 1).unwrap()
        };
        for (a, b) in y.values().iter().zip(composed.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn res_block_identity_when_main_path_is_zero() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(24);
        let cfg = BlockConfig { c_in: 3, c_out: 3, norm: Norm::Instance, resample: Resample::None, level: 0 };
        let block = SpiralResBlock::init(&mut params, &seeds, "r", cfg, 9);
        assert!(block.skip_proj.is_none());
        for idx in [block.conv1.weight, block.conv2.weight] {
            let w = params.get_mut(idx);
            *std::rc::Rc::make_mut(&mut w.data) = vec![0.0; w.numel()];
        }
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec((0..162 * 3).map(|i| i as f64 * 0.01).collect(), vec![162, 3]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();
        for (a, b) in y.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn res_block_projects_on_channel_change() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(25);
        let cfg = BlockConfig { c_in: 4, c_out: 8, norm: Norm::None, resample: Resample::None, level: 0 };
        let block = SpiralResBlock::init(&mut params, &seeds, "r", cfg, 9);
        assert!(block.skip_proj.is_some());
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec(vec![0.1; 162 * 4], vec![162, 4]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();
        assert_eq!(y.shape(), &[162, 8]);
    }

    #[test]
    fn res_block_gradient_sums_both_paths() {
        // finite differences through the full res block
        let m = icosphere(0, 1.0);
        let assets = TopologyAssets::build(&m, 1, 4, 4, 1).unwrap();
        let topo = BatchTopo::new(&assets, 1);
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(26);
        let cfg = BlockConfig { c_in: 2, c_out: 2, norm: Norm::None, resample: Resample::None, level: 0 };
        let block = SpiralResBlock::init(&mut params, &seeds, "r", cfg, 4);

        let x0: Vec<f64> = (0..24).map(|i| (i as f64 * 0.3).sin() * 0.5).collect();
        let wsum: Vec<f64> = (0..24).map(|i| 0.1 + 0.07 * i as f64).collect();
        let eval = |buf: &[Vec<f64>]| -> f64 {
            let tape = Tape::new();
            let bind = ParamBind::trainable(&params, &tape);
            let x = tape.leaf(buf[0].clone(), vec![12, 2]);
            let y = block.forward(&bind, &x, &topo, &[]).unwrap();
            ops::sum_all(&ops::mul(&y, &Tensor::from_vec(wsum.clone(), vec![12, 2])).unwrap())
                .unwrap()
                .scalar_value()
        };
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = tape.leaf(x0.clone(), vec![12, 2]);
        let y = block.forward(&bind, &x, &topo, &[]).unwrap();
        let root = ops::sum_all(&ops::mul(&y, &Tensor::from_vec(wsum.clone(), vec![12, 2])).unwrap()).unwrap();
        let grads = tape.backward(&root, false).unwrap();
        let analytic = grads.wrt(&x).unwrap().to_f64_vec();
        let mut f = |b: &[Vec<f64>]| eval(b);
        let numeric = crate::autodiff::check::central_diff_gradient(&mut f, &[x0], 1e-6);
        let err = crate::autodiff::check::max_rel_err(&[analytic], &numeric);
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn adain_block_requires_style_params() {
        let (_, topo) = topo2();
        let mut params = ParamSet::<f64>::new();
        let seeds = SeedStream::new(27);
        let cfg = BlockConfig { c_in: 3, c_out: 4, norm: Norm::AdaIn, resample: Resample::None, level: 0 };
        let block = SpiralBlock::init(&mut params, &seeds, "b", cfg, 9);
        let tape = Tape::new();
        let bind = ParamBind::trainable(&params, &tape);
        let x = Tensor::from_vec(vec![0.2; 162 * 3], vec![162, 3]);
        assert!(block.forward(&bind, &x, &topo, &[]).is_err());
        let style = [StyleParams {
            mu: Tensor::from_vec(vec![0.0; 4], vec![1, 4]),
            sigma: Tensor::from_vec(vec![1.0; 4], vec![1, 4]),
        }];
        let y = block.forward(&bind, &x, &topo, &style).unwrap();
        assert_eq!(y.shape(), &[162, 4]);
        let _ = NORM_EPS;
    }
}
