//! Neural signed-distance fitting with differentiable dual-marching-cubes
//! extraction.
//!
//! The crate is organised bottom-up:
//!
//! * [`encoding`]: multi-resolution hash-grid encoding, the SDF network that
//!   predicts per-vertex distances/offsets and per-cube extraction weights,
//!   and the texture field.
//! * [`extract`]: the weighted dual-marching-cubes extractor with analytic
//!   gradients of vertex positions, mesh validation and OBJ I/O.
//! * [`train`]: analytic target shapes, ellipsoid warm-up, coarse-to-fine
//!   fitting in SDF and surface mode, texture fitting and chamfer metrics.
//! * [`raster`]: a small deterministic rasterizer and PSNR for evaluation.

pub mod encoding;
pub mod extract;
pub mod geometry;
pub mod raster;
pub mod train;

pub use geometry::{Aabb, Vec3};
