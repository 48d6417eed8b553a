//! Software rasterizer for evaluation images and PSNR.

mod camera;
mod image;
mod render;

use thiserror::Error;

use crate::encoding::EncodingError;

pub use camera::{Camera, Frame, Projection, NEAR};
pub use image::{
    depth_image, psnr, read_normal_map, read_pnm, write_normal_map, write_pnm, Image, NORMAL_MAGIC, PSNR_CAP,
};
pub use render::{render, RenderTarget};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("image shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
    #[error("image format: {0}")]
    Format(String),
    #[error(transparent)]
    Texture(#[from] EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
