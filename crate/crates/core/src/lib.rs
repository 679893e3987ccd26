//! Style transfer for fixed-topology triangle meshes.
//!
//! This crate trains and evaluates an autoencoder that splits a 3D face mesh
//! into an identity (content) code and an expression (style) code, built on
//! spiral mesh convolutions and adversarial training. It ships a tape-based
//! autodiff engine, mesh I/O and multi-resolution sampling, a parametric
//! synthetic dataset with analytic ground truth, and the full metric suite.
//!
//! All coordinates and errors are in millimeters.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod mesh;
pub mod model;
pub mod nn;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use mesh::Mesh;
