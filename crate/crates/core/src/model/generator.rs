//! The generator: content encoder, style encoder, style-mapping MLP and
//! AdaIN-conditioned decoder.

use super::config::{ArchitectureConfig, LatentCode};
use super::Normalizer;
use crate::autodiff::{ops, Elem, ParamSet, Tape, Tensor, UnaryFn};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, TopologyAssets};
use crate::nn::{
    BatchTopo, BlockConfig, Mlp, Norm, ParamBind, Resample, SpiralBlock, SpiralConv,
    SpiralResBlock, StyleParams,
};
use crate::rng::SeedStream;

pub struct Generator<T: Elem> {
    pub params: ParamSet<T>,
    pub arch: ArchitectureConfig,
    pub normalizer: Normalizer,
    content_blocks: Vec<SpiralBlock>,
    content_res: Vec<SpiralResBlock>,
    content_mlp: Mlp,
    style_blocks: Vec<SpiralBlock>,
    style_mlp: Mlp,
    mapping: Mlp,
    decoder_mlp: Mlp,
    decoder_res: Vec<SpiralResBlock>,
    decoder_up: Vec<SpiralBlock>,
    decoder_final: SpiralConv,
    /// (channel count, receives AdaIN) per decoder norm site, in order.
    adain_sites: Vec<usize>,
}

impl<T: Elem> Generator<T> {
    pub fn new(arch: ArchitectureConfig, seeds: &SeedStream) -> Result<Self> {
        arch.validate()?;
        let mut params = ParamSet::new();
        let sizes = arch.level_sizes();
        let coarsest = *sizes.last().unwrap();
        let l = arch.spiral_length;
        let cb = arch.bottleneck_channels;

        // content encoder: downscaling blocks + two res blocks + MLP
        let mut content_blocks = Vec::new();
        let mut c_in = 3;
        for (lvl, &c_out) in arch.channels.iter().enumerate() {
            content_blocks.push(SpiralBlock::init(
                &mut params,
                seeds,
                &format!("content_encoder.block{lvl}"),
                BlockConfig { c_in, c_out, norm: Norm::Instance, resample: Resample::Down, level: lvl },
                l,
            ));
            c_in = c_out;
        }
        let bottom_level = arch.n_levels - 1;
        let content_res = vec![
            SpiralResBlock::init(
                &mut params,
                seeds,
                "content_encoder.res0",
                BlockConfig { c_in, c_out: cb, norm: Norm::Instance, resample: Resample::None, level: bottom_level },
                l,
            ),
            SpiralResBlock::init(
                &mut params,
                seeds,
                "content_encoder.res1",
                BlockConfig { c_in: cb, c_out: cb, norm: Norm::Instance, resample: Resample::None, level: bottom_level },
                l,
            ),
        ];
        let mut content_sizes = vec![coarsest * cb];
        content_sizes.extend_from_slice(&arch.content_mlp_hidden);
        content_sizes.push(arch.content_dim);
        let content_mlp = Mlp::init(&mut params, seeds, "content_encoder.mlp", &content_sizes, UnaryFn::Relu, None);

        // style encoder: downscaling blocks (no normalization) + bottleneck
        // block + mean pooling + MLP
        let mut style_blocks = Vec::new();
        let mut c_in = 3;
        for (lvl, &c_out) in arch.channels.iter().enumerate() {
            style_blocks.push(SpiralBlock::init(
                &mut params,
                seeds,
                &format!("style_encoder.block{lvl}"),
                BlockConfig { c_in, c_out, norm: Norm::None, resample: Resample::Down, level: lvl },
                l,
            ));
            c_in = c_out;
        }
        style_blocks.push(SpiralBlock::init(
            &mut params,
            seeds,
            "style_encoder.bottom",
            BlockConfig { c_in, c_out: cb, norm: Norm::None, resample: Resample::None, level: bottom_level },
            l,
        ));
        let mut style_sizes = vec![cb];
        style_sizes.extend_from_slice(&arch.style_mlp_hidden);
        style_sizes.push(arch.style_dim);
        let style_mlp = Mlp::init(&mut params, seeds, "style_encoder.mlp", &style_sizes, UnaryFn::Relu, None);

        // decoder: MLP to the coarse grid, two AdaIN res blocks, the first
        // up block with AdaIN, remaining up blocks without normalization,
        // then a linear spiral conv back to coordinates
        let mut dec_sizes = vec![arch.content_dim];
        dec_sizes.extend_from_slice(&arch.decoder_mlp_hidden);
        dec_sizes.push(coarsest * cb);
        let decoder_mlp = Mlp::init(&mut params, seeds, "decoder.mlp", &dec_sizes, UnaryFn::Relu, None);

        let decoder_res = vec![
            SpiralResBlock::init(
                &mut params,
                seeds,
                "decoder.res0",
                BlockConfig { c_in: cb, c_out: cb, norm: Norm::AdaIn, resample: Resample::None, level: bottom_level },
                l,
            ),
            SpiralResBlock::init(
                &mut params,
                seeds,
                "decoder.res1",
                BlockConfig { c_in: cb, c_out: cb, norm: Norm::AdaIn, resample: Resample::None, level: bottom_level },
                l,
            ),
        ];
        let mut decoder_up = Vec::new();
        let mut c_in = cb;
        for (i, lvl) in (0..arch.n_levels - 1).rev().enumerate() {
            let c_out = arch.channels[lvl];
            let norm = if i == 0 { Norm::AdaIn } else { Norm::None };
            decoder_up.push(SpiralBlock::init(
                &mut params,
                seeds,
                &format!("decoder.up{i}"),
                BlockConfig { c_in, c_out, norm, resample: Resample::Up, level: lvl },
                l,
            ));
            c_in = c_out;
        }
        let decoder_final = SpiralConv::init(&mut params, seeds, "decoder.out", 0, l, c_in, 3);

        let mut adain_sites = Vec::new();
        for r in &decoder_res {
            adain_sites.extend(r.adain_sites());
        }
        for b in &decoder_up {
            adain_sites.extend(b.adain_sites());
        }
        let n_adain: usize = adain_sites.iter().sum::<usize>() * 2;

        // mapping network: style code -> per-channel AdaIN (mu, sigma_raw)
        let mut map_sizes = vec![arch.style_dim];
        map_sizes.extend_from_slice(&arch.mapping_hidden);
        map_sizes.push(n_adain);
        let mapping = Mlp::init(&mut params, seeds, "mapping", &map_sizes, UnaryFn::Relu, None);
        // mapping biases stay out of weight decay
        for p in params.iter_mut() {
            if p.name.starts_with("mapping.") && p.name.ends_with(".bias") {
                p.no_decay = true;
            }
        }

        Ok(Generator {
            params,
            arch,
            normalizer: Normalizer::identity(),
            content_blocks,
            content_res,
            content_mlp,
            style_blocks,
            style_mlp,
            mapping,
            decoder_mlp,
            decoder_res,
            decoder_up,
            decoder_final,
            adain_sites,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.total_values()
    }

    /// Total per-channel AdaIN parameter count the mapping must produce.
    pub fn n_adain_params(&self) -> usize {
        self.adain_sites.iter().sum::<usize>() * 2
    }

    /// Content code of a raw-mm stacked batch: (B*V, 3) -> (B, content_dim).
    pub fn encode_content(
        &self,
        bind: &ParamBind<'_, T>,
        x_mm: &Tensor<T>,
        topo: &BatchTopo,
    ) -> Result<Tensor<T>> {
        let mut h = self.normalizer.normalize(x_mm, topo.batch)?;
        for b in &self.content_blocks {
            h = b.forward(bind, &h, topo, &[])?;
        }
        for r in &self.content_res {
            h = r.forward(bind, &h, topo, &[])?;
        }
        let coarsest = *topo.sizes.last().unwrap();
        let flat = h.reshape(vec![topo.batch, coarsest * self.arch.bottleneck_channels])?;
        self.content_mlp.forward(bind, &flat)
    }

    /// Style code of a raw-mm stacked batch: (B*V, 3) -> (B, style_dim).
    pub fn encode_style(
        &self,
        bind: &ParamBind<'_, T>,
        x_mm: &Tensor<T>,
        topo: &BatchTopo,
    ) -> Result<Tensor<T>> {
        let mut h = self.normalizer.normalize(x_mm, topo.batch)?;
        for b in &self.style_blocks {
            h = b.forward(bind, &h, topo, &[])?;
        }
        let coarsest = *topo.sizes.last().unwrap();
        let inv_v = T::one() / T::from_f64(coarsest as f64);
        let pooled = ops::segment_sum(&h, coarsest)?.scalar_mul(inv_v)?;
        self.style_mlp.forward(bind, &pooled)
    }

    /// Decodes (B, content_dim) + (B, style_dim) codes to raw-mm vertex
    /// positions (B*V, 3).
    pub fn decode(
        &self,
        bind: &ParamBind<'_, T>,
        content: &Tensor<T>,
        style: &Tensor<T>,
        topo: &BatchTopo,
    ) -> Result<Tensor<T>> {
        if content.shape() != [topo.batch, self.arch.content_dim] {
            return Err(Error::ShapeMismatch {
                op: "decode",
                detail: format!("content {:?}", content.shape()),
            });
        }
        if style.shape() != [topo.batch, self.arch.style_dim] {
            return Err(Error::ShapeMismatch {
                op: "decode",
                detail: format!("style {:?}", style.shape()),
            });
        }
        let mapped = self.mapping.forward(bind, style)?;
        let mut site_params = Vec::with_capacity(self.adain_sites.len());
        let mut off = 0;
        for &c in &self.adain_sites {
            let mu = ops::slice(&mapped, 1, off, c)?;
            let sigma_raw = ops::slice(&mapped, 1, off + c, c)?;
            // sigma = 1 + raw so zero mapping output modulates at identity scale
            let sigma = sigma_raw.add_scalar(T::one())?;
            site_params.push(StyleParams { mu, sigma });
            off += 2 * c;
        }

        let coarsest = *topo.sizes.last().unwrap();
        let cb = self.arch.bottleneck_channels;
        let mut h = self
            .decoder_mlp
            .forward(bind, content)?
            .reshape(vec![topo.batch * coarsest, cb])?;
        let mut site = 0;
        for r in &self.decoder_res {
            let take = r.adain_sites().len();
            h = r.forward(bind, &h, topo, &site_params[site..site + take])?;
            site += take;
        }
        for b in &self.decoder_up {
            let take = b.adain_sites().len();
            h = b.forward(bind, &h, topo, &site_params[site..site + take])?;
            site += take;
        }
        let normed = self.decoder_final.forward(bind, &h, topo)?;
        self.normalizer.denormalize(&normed, topo.batch)
    }

    /// Translation: decode x's content with s's style (reconstruction is the
    /// same call with s = x).
    pub fn translate(
        &self,
        bind: &ParamBind<'_, T>,
        x_mm: &Tensor<T>,
        s_mm: &Tensor<T>,
        topo: &BatchTopo,
    ) -> Result<Tensor<T>> {
        let content = self.encode_content(bind, x_mm, topo)?;
        let style = self.encode_style(bind, s_mm, topo)?;
        self.decode(bind, &content, &style, topo)
    }

    // --- single-mesh conveniences (no tape, batch of one) ---

    pub fn encode_mesh(&self, assets: &TopologyAssets, m: &Mesh) -> Result<LatentCode> {
        let topo = BatchTopo::new(assets, 1);
        self.encode_mesh_with(&topo, m)
    }

    pub fn encode_mesh_with(&self, topo: &BatchTopo, m: &Mesh) -> Result<LatentCode> {
        let bind = ParamBind::frozen(&self.params);
        let x = mesh_tensor::<T>(m, topo.sizes[0])?;
        let c = self.encode_content(&bind, &x, topo)?;
        let s = self.encode_style(&bind, &x, topo)?;
        Ok(LatentCode { content: c.to_f64_vec(), style: s.to_f64_vec() })
    }

    pub fn decode_code(&self, assets: &TopologyAssets, code: &LatentCode) -> Result<Mesh> {
        let topo = BatchTopo::new(assets, 1);
        self.decode_code_with(&topo, assets, code)
    }

    pub fn decode_code_with(
        &self,
        topo: &BatchTopo,
        assets: &TopologyAssets,
        code: &LatentCode,
    ) -> Result<Mesh> {
        if code.content.len() != self.arch.content_dim || code.style.len() != self.arch.style_dim {
            return Err(Error::Validation(format!(
                "latent code dims ({}, {}) do not match architecture ({}, {})",
                code.content.len(),
                code.style.len(),
                self.arch.content_dim,
                self.arch.style_dim
            )));
        }
        let bind = ParamBind::frozen(&self.params);
        let c = Tensor::from_f64_slice(&code.content, vec![1, self.arch.content_dim]);
        let s = Tensor::from_f64_slice(&code.style, vec![1, self.arch.style_dim]);
        let out = self.decode(&bind, &c, &s, topo)?;
        Mesh::from_flat_coords(&out.to_f64_vec(), &assets.levels[0].faces)
    }

    pub fn translate_mesh(&self, assets: &TopologyAssets, x: &Mesh, s: &Mesh) -> Result<Mesh> {
        let topo = BatchTopo::new(assets, 1);
        self.translate_mesh_with(&topo, assets, x, s)
    }

    pub fn translate_mesh_with(
        &self,
        topo: &BatchTopo,
        assets: &TopologyAssets,
        x: &Mesh,
        s: &Mesh,
    ) -> Result<Mesh> {
        let bind = ParamBind::frozen(&self.params);
        let xt = mesh_tensor::<T>(x, topo.sizes[0])?;
        let st = mesh_tensor::<T>(s, topo.sizes[0])?;
        let out = self.translate(&bind, &xt, &st, topo)?;
        Mesh::from_flat_coords(&out.to_f64_vec(), &assets.levels[0].faces)
    }

    pub fn reconstruct_mesh(&self, assets: &TopologyAssets, x: &Mesh) -> Result<Mesh> {
        self.translate_mesh(assets, x, x)
    }
}

/// Stacks one mesh into a (V, 3) tensor, checking the vertex count.
pub fn mesh_tensor<T: Elem>(m: &Mesh, v: usize) -> Result<Tensor<T>> {
    if m.vertex_count() != v {
        return Err(Error::VertexCountMismatch { left: m.vertex_count(), right: v });
    }
    Ok(Tensor::from_f64_slice(&m.flat_coords(), vec![v, 3]))
}

/// Stacks a batch of meshes into a (B*V, 3) tensor.
pub fn batch_tensor<T: Elem>(meshes: &[&Mesh], v: usize) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(meshes.len() * v * 3);
    for m in meshes {
        if m.vertex_count() != v {
            return Err(Error::VertexCountMismatch { left: m.vertex_count(), right: v });
        }
        for p in &m.vertices {
            data.extend(p.iter().map(|&c| T::from_f64(c)));
        }
    }
    Ok(Tensor::from_vec(data, vec![meshes.len() * v, 3]))
}

/// The tape-tracked variant, for inputs that need gradients (R1 penalty).
pub fn batch_leaf<T: Elem>(tape: &Tape<T>, meshes: &[&Mesh], v: usize) -> Result<Tensor<T>> {
    let t = batch_tensor::<T>(meshes, v)?;
    Ok(tape.leaf(t.values().to_vec(), t.shape().to_vec()))
}
