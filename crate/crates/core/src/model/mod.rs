//! Network assembly: generator (content/style encoders, mapping, decoder),
//! discriminator, and the coordinate normalizer shared by both.

mod config;
mod discriminator;
mod generator;

pub use config::{ArchitectureConfig, LatentCode};
pub use discriminator::{DiscOutput, Discriminator};
pub use generator::{batch_leaf, batch_tensor, mesh_tensor, Generator};

use crate::autodiff::{ops, Elem, Tensor};
use crate::error::{Error, Result};

/// Affine coordinate normalization in front of the networks: subtract a
/// reference mesh (usually the train-split mean) and scale to unit order.
/// Stored with the checkpoint so encode/decode keep speaking millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    /// (V, 3) reference, flattened row-major; empty means identity.
    pub center: Vec<f64>,
    pub scale: f64,
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer { center: Vec::new(), scale: 1.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.center.is_empty() && self.scale == 1.0
    }

    /// Fits center = mean mesh, scale = rms residual coordinate over a
    /// training sample of flattened (V*3) coordinate buffers.
    pub fn fit(coords: &[Vec<f64>]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Validation("cannot fit normalizer on empty set".into()));
        }
        let n = coords[0].len();
        let mut center = vec![0.0f64; n];
        for c in coords {
            if c.len() != n {
                return Err(Error::Validation("inconsistent coordinate buffer lengths".into()));
            }
            for (acc, v) in center.iter_mut().zip(c) {
                *acc += v;
            }
        }
        for v in &mut center {
            *v /= coords.len() as f64;
        }
        let mut ss = 0.0f64;
        for c in coords {
            for (v, m) in c.iter().zip(&center) {
                ss += (v - m) * (v - m);
            }
        }
        let scale = (ss / (coords.len() * n) as f64).sqrt().max(1e-9);
        Ok(Normalizer { center, scale })
    }

    /// (x - center) / scale on a stacked batch.
    pub fn normalize<T: Elem>(&self, x_mm: &Tensor<T>, batch: usize) -> Result<Tensor<T>> {
        if self.is_identity() {
            return Ok(x_mm.clone());
        }
        let v = self.center.len() / 3;
        if x_mm.shape() != [batch * v, 3] {
            return Err(Error::ShapeMismatch {
                op: "normalize",
                detail: format!("{:?} vs batch {batch} x ({v}, 3)", x_mm.shape()),
            });
        }
        let center = Tensor::from_f64_slice(&self.center, vec![v, 3]);
        let tiled = ops::tile_rows(&center, batch)?;
        x_mm.sub(&tiled)?.scalar_mul(T::from_f64(1.0 / self.scale))
    }

    /// x * scale + center, back to millimeters.
    pub fn denormalize<T: Elem>(&self, x: &Tensor<T>, batch: usize) -> Result<Tensor<T>> {
        if self.is_identity() {
            return Ok(x.clone());
        }
        let v = self.center.len() / 3;
        let center = Tensor::from_f64_slice(&self.center, vec![v, 3]);
        let tiled = ops::tile_rows(&center, batch)?;
        x.scalar_mul(T::from_f64(self.scale))?.add(&tiled)
    }
}
