use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::SdfNetwork;
use crate::extract::{extract_mesh, GridLayout, TriMesh};
use crate::geometry::Vec3;

use super::metrics::{ChamferOracle, ChamferResult};
use super::network_grid::network_grid;
use super::optim::{LearningRates, ParamOptimizer};
use super::sampling::training_batch;
use super::sdf_loss::{sdf_step, SdfLossWeights};
use super::shapes::TargetShape;
use super::TrainError;

fn one() -> f64 {
    1.0
}

fn eik_default() -> f64 {
    0.1
}

fn near_default() -> f64 {
    0.25
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub resolution: usize,
    pub iterations: usize,
    #[serde(default = "one")]
    pub w_sdf: f64,
    #[serde(default = "eik_default")]
    pub w_eik: f64,
    /// Share of each batch drawn near the target surface.
    #[serde(default = "near_default")]
    pub near_fraction: f64,
}

impl Stage {
    pub fn new(resolution: usize, iterations: usize) -> Self {
        Self {
            resolution,
            iterations,
            w_sdf: 1.0,
            w_eik: 0.1,
            near_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSchedule {
    pub stages: Vec<Stage>,
}

impl Default for FitSchedule {
    /// Coarse (R=64) then fine (R=128), 5000 iterations each.
    fn default() -> Self {
        Self::coarse_to_fine(64, 5000, 128, 5000)
    }
}

impl FitSchedule {
    /// Two stages; the coarse stage uses half the near-surface share.
    pub fn coarse_to_fine(coarse: usize, coarse_iters: usize, fine: usize, fine_iters: usize) -> Self {
        Self {
            stages: vec![
                Stage {
                    near_fraction: 0.125,
                    ..Stage::new(coarse, coarse_iters)
                },
                Stage::new(fine, fine_iters),
            ],
        }
    }

    /// An empty schedule is valid and leaves the network untouched.
    pub fn validate(&self, max_resolution: usize) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::InvalidSchedule(m));
        let mut prev = 0;
        for (n, s) in self.stages.iter().enumerate() {
            if s.resolution < 2 {
                return err(format!("stage {n}: resolution must be at least 2"));
            }
            if s.resolution > max_resolution {
                return err(format!(
                    "stage {n}: resolution {} exceeds the maximum {max_resolution}",
                    s.resolution
                ));
            }
            if s.resolution < prev {
                return err(format!("stage {n}: resolutions must not decrease"));
            }
            if s.iterations == 0 {
                return err(format!("stage {n}: iteration count must be positive"));
            }
            let ok = |x: f64| x.is_finite() && x >= 0.0;
            if !ok(s.w_sdf) || !ok(s.w_eik) || !(0.0..=1.0).contains(&s.near_fraction) {
                return err(format!("stage {n}: invalid loss weights or near-surface share"));
            }
            prev = s.resolution;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub samples: usize,
    /// The gradient-norm term uses every `eik_stride`-th sample.
    pub eik_stride: usize,
    pub chamfer_every: usize,
    pub chamfer_samples: usize,
    pub max_resolution: usize,
    pub rates: LearningRates,
    /// Learning-rate factor reached at the last iteration of the schedule;
    /// the decay is exponential and runs across all stages.
    pub final_lr_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            samples: 4096,
            eik_stride: 4,
            chamfer_every: 250,
            chamfer_samples: 100_000,
            max_resolution: 256,
            rates: LearningRates::default(),
            final_lr_factor: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub iter: usize,
    pub stage: usize,
    pub loss_total: f64,
    pub loss_sdf: f64,
    pub loss_eik: f64,
    pub chamfer: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitLog {
    pub rows: Vec<LossRow>,
    /// Chamfer at the end of each stage, at that stage's resolution.
    pub stage_chamfer: Vec<ChamferResult>,
}

pub const LOSS_HEADER: &str = "iter,stage,loss_total,loss_sdf,loss_eik,chamfer";

impl FitLog {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{LOSS_HEADER}")?;
        for r in &self.rows {
            let chamfer = r.chamfer.map(|c| format!("{c:.17e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{}",
                r.iter, r.stage, r.loss_total, r.loss_sdf, r.loss_eik, chamfer
            )?;
        }
        Ok(())
    }
}

/// Exponential decay from 1 at the first iteration to `final_factor` at the
/// last.
pub fn lr_factor(final_factor: f64, it: usize, iterations: usize) -> f64 {
    if iterations <= 1 {
        return 1.0;
    }
    final_factor.powf(it as f64 / (iterations - 1) as f64)
}

/// Extracts the network's surface on a `resolution`³ grid over its domain.
pub fn extract_network(net: &SdfNetwork, resolution: usize) -> Result<TriMesh, TrainError> {
    let grid = network_grid(net, GridLayout::new(resolution, net.bounds))?;
    Ok(extract_mesh(&grid)?)
}

fn measure(net: &SdfNetwork, resolution: usize, oracle: &ChamferOracle, iteration: usize) -> Result<ChamferResult, TrainError> {
    let mesh = extract_network(net, resolution)?;
    if mesh.is_empty() {
        return Err(TrainError::EmptyMesh {
            iteration: Some(iteration),
        });
    }
    oracle.evaluate(&mesh)
}

/// Fits the network's distance field to `target` stage by stage.
///
/// Each iteration draws a fresh batch (stratified plus near-surface) from a
/// generator seeded once with `seed`. Chamfer is measured every
/// `chamfer_every` iterations and at the end of every stage; the network's
/// offset scale follows the stage resolution.
pub fn fit_geometry(
    net: &mut SdfNetwork,
    target: &TargetShape,
    schedule: &FitSchedule,
    seed: u64,
    options: &FitOptions,
) -> Result<FitLog, TrainError> {
    target.validate(&net.bounds).map_err(TrainError::InvalidTarget)?;
    schedule.validate(options.max_resolution)?;
    let oracle = ChamferOracle::new(target, options.chamfer_samples, seed)?;
    let mut opt = ParamOptimizer::new(
        &net.buffers().iter().map(|b| b.len()).collect::<Vec<_>>(),
        options.rates,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = FitLog::default();
    let mut global = 0;
    let total: usize = schedule.stages.iter().map(|s| s.iterations).sum();
    for (stage_idx, stage) in schedule.stages.iter().enumerate() {
        net.set_resolution(stage.resolution);
        let cell = net.bounds.size().min() / stage.resolution as f64;
        let weights = SdfLossWeights {
            w_sdf: stage.w_sdf,
            w_eik: stage.w_eik,
            w_offset: 0.0,
            eik_h: 0.5 * cell,
            eik_stride: options.eik_stride,
        };
        let mut last_chamfer = None;
        for it in 0..stage.iterations {
            opt.set_lr_scale(lr_factor(options.final_lr_factor, global, total));
            let pts = training_batch(options.samples, stage.near_fraction, target, &net.bounds, &mut rng)?;
            let tgt: Vec<f64> = pts.iter().map(|p: &Vec3| target.sdf(p)).collect();
            let parts = sdf_step(net, &mut opt, &pts, &tgt, &weights)?;
            if !parts.total.is_finite() {
                return Err(TrainError::NonFinite {
                    stage: stage_idx,
                    iteration: global,
                });
            }
            let chamfer = if options.chamfer_every > 0 && (global + 1) % options.chamfer_every == 0 {
                let c = measure(net, stage.resolution, &oracle, global)?;
                if it + 1 == stage.iterations {
                    last_chamfer = Some(c);
                }
                Some(c.chamfer_l1)
            } else {
                None
            };
            log.rows.push(LossRow {
                iter: global,
                stage: stage_idx,
                loss_total: parts.total,
                loss_sdf: parts.sdf,
                loss_eik: parts.eik,
                chamfer,
            });
            global += 1;
        }
        let c = match last_chamfer {
            Some(c) => c,
            None => measure(net, stage.resolution, &oracle, global)?,
        };
        log::info!("stage {stage_idx} (R={}): chamfer {:.5}", stage.resolution, c.chamfer_l1);
        log.stage_chamfer.push(c);
    }
    Ok(log)
}
