//! Weighted dual marching cubes.
//!
//! One vertex per sign-changing cube, placed at a β-weighted mean of
//! α-biased edge crossings. Every interior sign-changing grid edge yields a
//! quad over its four neighbouring cubes, fanned into four triangles around a
//! γ-weighted midpoint. [`extract_backward`] propagates vertex-position
//! gradients back to the sdf values, offsets and cube weights.

mod backward;
mod crossing;
mod grid;
mod mesh;
mod obj;
mod surface;
mod validate;

use thiserror::Error;

pub use backward::{extract_backward, GridGradients};
pub use crossing::{dual_vertex, edge_crossing};
pub use grid::{
    nudge, CubeWeightGrad, CubeWeights, FlexiGrid, GridLayout, CORNER_OFFSETS, CUBE_EDGES, S_EPS,
};
pub use mesh::{Provenance, TriMesh};
pub use obj::{read_obj, write_obj};
pub use surface::{edge_quad_cubes, extract_mesh};
pub use validate::{mesh_validate, MeshReport};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("grid layout needs a positive resolution and a non-empty box")]
    InvalidLayout,
    #[error("expected {expected} vertices, got {sdf} sdf values and {offsets} offsets")]
    BufferLength {
        expected: usize,
        sdf: usize,
        offsets: usize,
    },
    #[error("vertex {vertex}: {reason}")]
    InvalidVertex { vertex: usize, reason: &'static str },
    #[error("cube {cube}: {reason}")]
    InvalidCube { cube: usize, reason: &'static str },
    #[error("edge crossing needs opposite signs, got {s_a} and {s_b}")]
    SameSign { s_a: f64, s_b: f64 },
    #[error("mesh vertex {vertex} does not match the grid: {reason}")]
    ProvenanceMismatch { vertex: usize, reason: &'static str },
    #[error("expected {expected} upstream gradients, got {found}")]
    GradientLength { expected: usize, found: usize },
    #[error("obj line {line}: {message}")]
    ObjParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
