//! Fitting the SDF network to analytic targets and measuring the result.

mod fit;
mod kdtree;
mod metrics;
mod network_grid;
mod optim;
mod sampling;
mod sdf_loss;
mod shapes;
mod surface;
mod texture_fit;
mod warmup;

use thiserror::Error;

use crate::encoding::EncodingError;
use crate::extract::ExtractError;

pub use fit::{extract_network, fit_geometry, FitLog, FitOptions, FitSchedule, LossRow, Stage, LOSS_HEADER};
pub use kdtree::KdTree;
pub use metrics::{chamfer, chamfer_points, target_surface_samples, ChamferOracle, ChamferResult, TARGET_SAMPLING_RESOLUTION};
pub use network_grid::{fill_cube_weights, network_grid};
pub use optim::{LearningRates, ParamOptimizer};
pub use sampling::{near_surface, probe_points, stratified, training_batch, uniform, NEAR_BAND};
pub use sdf_loss::{sdf_step, LossParts, SdfLossWeights};
pub use shapes::{ellipsoid_sdf, sphere_sdf, TargetColor, TargetShape};
pub use surface::{
    fit_surface, fit_surface_mode, surface_error, surface_loss, BandOptions, DirectGrid, NetworkSurface, SurfaceParams,
};
pub use texture_fit::{fit_texture, texture_rmse, TextureLog, TextureOptions};
pub use warmup::{init_ellipsoid, probe_error, WarmupOptions, WarmupReport, PROBE_POINTS, PROBE_SEED};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("non-finite loss at stage {stage}, iteration {iteration}")]
    NonFinite { stage: usize, iteration: usize },
    #[error("extraction produced an empty mesh{}", .iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    EmptyMesh { iteration: Option<usize> },
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Autodiff(#[from] flexfit_autodiff::AutodiffError),
}
