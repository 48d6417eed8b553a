use flexfit_autodiff::Tape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::TextureField;
use crate::extract::TriMesh;
use crate::geometry::Vec3;

use super::optim::{LearningRates, ParamOptimizer};
use super::shapes::TargetColor;
use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureOptions {
    pub samples: usize,
    /// Size of the fixed surface probe set used for the reported RMSE.
    pub probes: usize,
    pub rates: LearningRates,
}

impl Default for TextureOptions {
    fn default() -> Self {
        Self {
            samples: 1024,
            probes: 4096,
            rates: LearningRates::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TextureLog {
    /// Mean squared RGB error per iteration, before each update.
    pub losses: Vec<f64>,
    /// RMSE over the probe set after training.
    pub rmse: f64,
}

fn split(samples: Vec<(Vec3, Vec3)>) -> (Vec<Vec3>, Vec<Vec3>) {
    samples.into_iter().unzip()
}

/// RMSE of the texture against `color` over `n` surface samples, viewed
/// along the face normal.
pub fn texture_rmse(tex: &TextureField, mesh: &TriMesh, color: &TargetColor, n: usize, seed: u64) -> Result<f64, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pos, nrm) = split(mesh.sample_surface(n, &mut rng));
    if pos.is_empty() {
        return Err(TrainError::EmptyMesh { iteration: None });
    }
    let rgb = tex.eval_batch(&pos, &nrm, &nrm)?;
    let se: f64 = rgb
        .iter()
        .zip(&pos)
        .map(|(c, p)| {
            let t = color.color(p);
            (0..3).map(|k| (c[k] - t[k]).powi(2)).sum::<f64>()
        })
        .sum();
    Ok((se / (3 * pos.len()) as f64).sqrt())
}

/// Fits the texture field to `color` on area-weighted samples of `mesh`.
/// Each sample uses its face normal as both normal and view direction.
pub fn fit_texture(
    tex: &mut TextureField,
    mesh: &TriMesh,
    color: &TargetColor,
    iterations: usize,
    seed: u64,
    options: &TextureOptions,
) -> Result<TextureLog, TrainError> {
    if mesh.is_empty() || !(mesh.total_area() > 0.0) {
        return Err(TrainError::EmptyMesh { iteration: None });
    }
    let sizes: Vec<usize> = tex.buffers().iter().map(|b| b.len()).collect();
    let mut opt = ParamOptimizer::new(&sizes, options.rates);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let (pos, nrm) = split(mesh.sample_surface(options.samples, &mut rng));
        let target: Vec<f64> = pos.iter().flat_map(|p| color.color(p)).collect();
        let lookup = tex.lookup(&pos)?;
        let mut tape = Tape::new();
        let vars = tex.bind(&mut tape);
        let rgb = tex.eval_tape(&mut tape, &vars, &lookup, &nrm, &nrm)?;
        let t = tape.constant(target, pos.len(), 3);
        let d = tape.sub(rgb, t);
        let d = tape.square(d);
        let loss = tape.mean(d);
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(TrainError::NonFinite { stage: 0, iteration: it });
        }
        losses.push(value);
        let grads = tape.backward(loss)?;
        opt.step(tex.buffers_mut(), &grads, &vars.all())?;
    }
    let rmse = texture_rmse(tex, mesh, color, options.probes, seed ^ 0x7e47)?;
    Ok(TextureLog { losses, rmse })
}
