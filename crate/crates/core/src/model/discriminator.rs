//! Multi-task adversarial discriminator: one real-vs-translated logit per
//! style class.

use super::config::ArchitectureConfig;
use super::Normalizer;
use crate::autodiff::{Elem, ParamSet, Tensor};
use crate::error::Result;
use crate::nn::{BatchTopo, BlockConfig, Linear, Norm, ParamBind, Resample, SpiralBlock};
use crate::rng::SeedStream;

pub struct Discriminator<T: Elem> {
    pub params: ParamSet<T>,
    pub arch: ArchitectureConfig,
    pub normalizer: Normalizer,
    blocks: Vec<SpiralBlock>,
    classifier: Linear,
}

/// Forward products: the flattened last feature layer (input to the
/// classifier) and the per-class logits.
pub struct DiscOutput<T: Elem> {
    pub features: Tensor<T>,
    pub logits: Tensor<T>,
}

impl<T: Elem> Discriminator<T> {
    pub fn new(arch: ArchitectureConfig, seeds: &SeedStream) -> Result<Self> {
        arch.validate()?;
        let mut params = ParamSet::new();
        let l = arch.spiral_length;
        let mut blocks = Vec::new();
        let mut c_in = 3;
        for (lvl, &c_out) in arch.channels.iter().enumerate() {
            blocks.push(SpiralBlock::init(
                &mut params,
                seeds,
                &format!("discriminator.block{lvl}"),
                BlockConfig { c_in, c_out, norm: Norm::None, resample: Resample::Down, level: lvl },
                l,
            ));
            c_in = c_out;
        }
        let bottom = arch.n_levels - 1;
        blocks.push(SpiralBlock::init(
            &mut params,
            seeds,
            "discriminator.bottom",
            BlockConfig {
                c_in,
                c_out: arch.bottleneck_channels,
                norm: Norm::None,
                resample: Resample::None,
                level: bottom,
            },
            l,
        ));
        let feat_dim = arch.coarsest_vertices() * arch.bottleneck_channels;
        let classifier = Linear::init(
            &mut params,
            seeds,
            "discriminator.classifier",
            feat_dim,
            arch.n_style_classes,
        );
        Ok(Discriminator { params, arch, normalizer: Normalizer::identity(), blocks, classifier })
    }

    pub fn param_count(&self) -> usize {
        self.params.total_values()
    }

    /// Raw per-class logits for a raw-mm stacked batch; sigmoid lives in the
    /// losses, so the two adversarial sides stay numerically stable.
    pub fn forward(
        &self,
        bind: &ParamBind<'_, T>,
        x_mm: &Tensor<T>,
        topo: &BatchTopo,
    ) -> Result<DiscOutput<T>> {
        let mut h = self.normalizer.normalize(x_mm, topo.batch)?;
        for b in &self.blocks {
            h = b.forward(bind, &h, topo, &[])?;
        }
        let coarsest = *topo.sizes.last().unwrap();
        let features = h.reshape(vec![topo.batch, coarsest * self.arch.bottleneck_channels])?;
        let logits = self.classifier.forward(bind, &features)?;
        Ok(DiscOutput { features, logits })
    }

    /// Logits for one mesh.
    pub fn discriminate_mesh(
        &self,
        assets: &crate::mesh::TopologyAssets,
        m: &crate::mesh::Mesh,
    ) -> Result<Vec<f64>> {
        let topo = BatchTopo::new(assets, 1);
        let bind = ParamBind::frozen(&self.params);
        let x = super::generator::mesh_tensor::<T>(m, topo.sizes[0])?;
        Ok(self.forward(&bind, &x, &topo)?.logits.to_f64_vec())
    }
}
