//! Instance normalization and its adaptive (style-conditioned) variant,
//! computed per sample over the vertex dimension with population variance.

use crate::autodiff::{ops, Elem, Tensor};
use crate::error::Result;

pub const NORM_EPS: f64 = 1e-5;

/// Affine-free instance normalization of a stacked batch (B*v, C): each
/// sample's channels are shifted to mean 0 and scaled by
/// 1/sqrt(population var + eps).
pub fn instance_norm<T: Elem>(x: &Tensor<T>, v: usize) -> Result<Tensor<T>> {
    let (xc, inv_sigma) = normalize_parts(x, v)?;
    xc.mul(&ops::repeat_rows(&inv_sigma, v)?)
}

/// AdaIN: normalize as instance_norm, then rescale to the mapped per-channel
/// (mu, sigma): sigma * (x - mu(x)) / sigma(x) + mu. `mu` and `sigma` are
/// (B, C) final values.
pub fn adain<T: Elem>(
    x: &Tensor<T>,
    v: usize,
    mu: &Tensor<T>,
    sigma: &Tensor<T>,
) -> Result<Tensor<T>> {
    let normed = instance_norm(x, v)?;
    normed
        .mul(&ops::repeat_rows(sigma, v)?)?
        .add(&ops::repeat_rows(mu, v)?)
}

fn normalize_parts<T: Elem>(x: &Tensor<T>, v: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let inv_v = T::one() / T::from_f64(v as f64);
    let mean = ops::segment_sum(x, v)?.scalar_mul(inv_v)?;
    let xc = x.sub(&ops::repeat_rows(&mean, v)?)?;
    let var = ops::segment_sum(&xc.mul(&xc)?, v)?.scalar_mul(inv_v)?;
    let inv_sigma = var.add_scalar(T::from_f64(NORM_EPS))?.sqrt()?.recip()?;
    Ok((xc, inv_sigma))
}
