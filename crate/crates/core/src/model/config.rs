//! Architecture configuration and named presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural description of the networks. `channels[i]` is the output
/// width of the i-th downscaling block (input is always 3 coordinate
/// channels); `bottleneck_channels` is the width of the res blocks at the
/// coarsest level. The decoder mirrors the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub preset: String,
    pub n_levels: usize,
    pub factor: usize,
    pub spiral_length: usize,
    pub dilation: usize,
    /// Vertex count of the shared topology at full resolution.
    pub template_vertices: usize,
    pub channels: Vec<usize>,
    pub bottleneck_channels: usize,
    pub content_dim: usize,
    pub style_dim: usize,
    pub n_style_classes: usize,
    pub content_mlp_hidden: Vec<usize>,
    pub style_mlp_hidden: Vec<usize>,
    pub decoder_mlp_hidden: Vec<usize>,
    pub mapping_hidden: Vec<usize>,
}

impl ArchitectureConfig {
    /// Desk-scale preset: 3 levels, factor 4, channels 3 -> 16 -> 32 -> 64,
    /// two bottleneck res blocks, 8 content and 4 style dimensions.
    pub fn synth(template_vertices: usize, n_style_classes: usize) -> Self {
        ArchitectureConfig {
            preset: "synth".into(),
            n_levels: 3,
            factor: 4,
            spiral_length: 9,
            dilation: 1,
            template_vertices,
            channels: vec![16, 32],
            bottleneck_channels: 64,
            content_dim: 8,
            style_dim: 4,
            n_style_classes,
            content_mlp_hidden: vec![64],
            style_mlp_hidden: vec![32],
            decoder_mlp_hidden: vec![64],
            mapping_hidden: vec![64, 64, 16],
        }
    }

    /// 5k-vertex-class preset with (4, 4) latent dimensions and 17 style
    /// classes. Channel widths are exposed here so they can be corrected
    /// without code changes.
    pub fn coma() -> Self {
        ArchitectureConfig {
            preset: "coma".into(),
            n_levels: 4,
            factor: 4,
            spiral_length: 9,
            dilation: 1,
            template_vertices: 5023,
            channels: vec![16, 32, 64],
            bottleneck_channels: 128,
            content_dim: 4,
            style_dim: 4,
            n_style_classes: 17,
            content_mlp_hidden: vec![128],
            style_mlp_hidden: vec![64],
            decoder_mlp_hidden: vec![128],
            mapping_hidden: vec![128, 128, 16],
        }
    }

    /// 27k-vertex-class preset with (20, 5) latent dimensions and 20 style
    /// classes.
    pub fn facescape() -> Self {
        ArchitectureConfig {
            preset: "facescape".into(),
            n_levels: 4,
            factor: 4,
            spiral_length: 9,
            dilation: 1,
            template_vertices: 26317,
            channels: vec![32, 64, 128],
            bottleneck_channels: 256,
            content_dim: 20,
            style_dim: 5,
            n_style_classes: 20,
            content_mlp_hidden: vec![256],
            style_mlp_hidden: vec![128],
            decoder_mlp_hidden: vec![256],
            mapping_hidden: vec![256, 256, 256, 256, 256, 256, 16],
        }
    }

    pub fn by_name(name: &str, template_vertices: usize, n_style_classes: usize) -> Result<Self> {
        match name {
            "synth" => Ok(Self::synth(template_vertices, n_style_classes)),
            "coma" => Ok(Self::coma()),
            "facescape" => Ok(Self::facescape()),
            other => Err(Error::Config(format!("unknown architecture preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_levels < 2 {
            return Err(Error::Config("need at least two resolution levels".into()));
        }
        if self.channels.len() != self.n_levels - 1 {
            return Err(Error::Config(format!(
                "{} downscaling channel widths for {} levels (need n_levels - 1)",
                self.channels.len(),
                self.n_levels
            )));
        }
        if self.content_dim < 1 || self.style_dim < 1 {
            return Err(Error::Config("latent dimensions must be >= 1".into()));
        }
        if self.n_style_classes < 2 {
            return Err(Error::Config("need at least two style classes".into()));
        }
        if self.spiral_length < 1 || self.dilation < 1 {
            return Err(Error::Config("spiral length and dilation must be >= 1".into()));
        }
        Ok(())
    }

    /// Vertex counts per level under repeated ceil(V / factor) coarsening.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.template_vertices];
        for _ in 1..self.n_levels {
            sizes.push(sizes.last().unwrap().div_ceil(self.factor));
        }
        sizes
    }

    pub fn coarsest_vertices(&self) -> usize {
        *self.level_sizes().last().unwrap()
    }
}

/// Content and style vectors for one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub content: Vec<f64>,
    pub style: Vec<f64>,
}

impl LatentCode {
    pub fn is_finite(&self) -> bool {
        self.content.iter().chain(&self.style).all(|v| v.is_finite())
    }
}
