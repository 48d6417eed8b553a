use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::SdfNetwork;
use crate::geometry::Vec3;

use super::optim::{LearningRates, ParamOptimizer};
use super::sampling::{probe_points, training_batch};
use super::sdf_loss::{sdf_step, SdfLossWeights};
use super::shapes::TargetShape;
use super::TrainError;

pub const PROBE_SEED: u64 = 0x9e37_79b9;
pub const PROBE_POINTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmupOptions {
    pub iterations: usize,
    pub samples: usize,
    pub near_fraction: f64,
    pub rates: LearningRates,
    pub offset_weight: f64,
    /// Probe error above which a warning is logged.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for WarmupOptions {
    fn default() -> Self {
        Self {
            iterations: 500,
            samples: 4096,
            near_fraction: 0.25,
            rates: LearningRates::default(),
            offset_weight: 1.0,
            tolerance: 0.01,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarmupReport {
    /// Training loss per iteration.
    pub losses: Vec<f64>,
    /// Mean `|s − sdf*|` over the fixed probe set after training.
    pub probe_error: f64,
    pub converged: bool,
}

/// Mean absolute error of the network against `target` on the fixed probe
/// set.
pub fn probe_error(net: &SdfNetwork, target: &TargetShape) -> Result<f64, TrainError> {
    let probes = probe_points(PROBE_POINTS, &net.bounds, PROBE_SEED);
    let s = net.sdf_values(&probes)?;
    Ok(s.iter().zip(&probes).map(|(s, p)| (s - target.sdf(p)).abs()).sum::<f64>() / probes.len() as f64)
}

/// Regresses the network onto an ellipsoid distance field. Offsets are
/// pulled toward zero. A probe error above `options.tolerance` is logged
/// as a warning, not returned as an error.
pub fn init_ellipsoid(
    net: &mut SdfNetwork,
    semi_axes: [f64; 3],
    options: &WarmupOptions,
) -> Result<WarmupReport, TrainError> {
    let target = TargetShape::ellipsoid(semi_axes);
    target.validate(&net.bounds).map_err(TrainError::InvalidTarget)?;
    let mut opt = ParamOptimizer::new(
        &net.buffers().iter().map(|b| b.len()).collect::<Vec<_>>(),
        options.rates,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let weights = SdfLossWeights {
        w_sdf: 1.0,
        w_eik: 0.0,
        w_offset: options.offset_weight,
        eik_h: 0.0,
        eik_stride: 1,
    };
    let mut losses = Vec::with_capacity(options.iterations);
    for it in 0..options.iterations {
        let pts = training_batch(options.samples, options.near_fraction, &target, &net.bounds, &mut rng)?;
        let tgt: Vec<f64> = pts.iter().map(|p: &Vec3| target.sdf(p)).collect();
        let parts = sdf_step(net, &mut opt, &pts, &tgt, &weights)?;
        if !parts.total.is_finite() {
            return Err(TrainError::NonFinite { stage: 0, iteration: it });
        }
        losses.push(parts.total);
    }
    let probe_error = probe_error(net, &target)?;
    let converged = probe_error < options.tolerance;
    if !converged {
        log::warn!(
            "ellipsoid warm-up did not converge: probe error {probe_error:.5} after {} iterations",
            options.iterations
        );
    }
    Ok(WarmupReport {
        losses,
        probe_error,
        converged,
    })
}
