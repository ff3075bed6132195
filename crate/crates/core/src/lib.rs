//! Directed distance fields over triangle meshes.
//!
//! A directed distance field maps an oriented point `(x, θ)` to the
//! distance along `θ` to the first surface, or to a miss. This crate has an
//! exact BVH-backed field for meshes, a dataset sampler, a small MLP that
//! learns the field, a renderer and a marching-cubes reconstruction driven
//! by either field, and point-cloud metrics for evaluation.

pub mod cli;
pub mod error;
pub mod field;
pub mod mesh;
pub mod metrics;
pub mod nn;
pub mod recon;
pub mod render;
pub mod sampler;
pub mod util;

pub use error::{DdfError, Result};
