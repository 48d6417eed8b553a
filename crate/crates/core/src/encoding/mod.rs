//! Hash-grid positional encoding and the networks built on it.

mod checkpoint;
mod hashgrid;
mod mlp;
mod sdf_net;
mod texture;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use hashgrid::{spatial_hash, HashGrid, HashGridConfig, Lookup, HASH_PRIMES};
pub use mlp::{BoundDense, Dense, Mlp, SkipMlp};
pub use sdf_net::{
    activate_cube, SdfConfig, SdfNetwork, SdfVars, VertexOutputs, CUBE_OUTPUTS, VERTEX_OUTPUTS,
    WEIGHT_FLOOR,
};
pub use texture::{TextureConfig, TextureField, TextureVars, UNIT_TOL};

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("point {point} has a non-finite coordinate")]
    NonFinite { point: usize },
    #[error("{what} must be unit length, norm is {norm}")]
    NotUnit { what: &'static str, norm: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
