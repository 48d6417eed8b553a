use flexfit_autodiff::{AdamConfig, AdamState, Gradients, Var};
use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    /// Hash-table entries.
    pub table: f64,
    /// MLP weights and biases.
    pub mlp: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            table: 1e-2,
            mlp: 1e-3,
        }
    }
}

/// One Adam state per parameter buffer. Buffer 0 is the hash table, the
/// rest are MLP buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamOptimizer {
    states: Vec<AdamState>,
    base: Vec<f64>,
}

impl ParamOptimizer {
    pub fn new(sizes: &[usize], rates: LearningRates) -> Self {
        let states = sizes
            .iter()
            .enumerate()
            .map(|(n, &len)| {
                let lr = if n == 0 { rates.table } else { rates.mlp };
                AdamState::new(len, AdamConfig::with_lr(lr))
            })
            .collect::<Vec<_>>();
        let base = states.iter().map(|s| s.config.lr).collect();
        Self { states, base }
    }

    /// Sets every learning rate to `factor` times its initial value.
    pub fn set_lr_scale(&mut self, factor: f64) {
        for (s, b) in self.states.iter_mut().zip(&self.base) {
            s.config.lr = b * factor;
        }
    }

    /// Applies one update. Buffers without a gradient are left alone.
    pub fn step(&mut self, buffers: Vec<&mut Vec<f64>>, grads: &Gradients, vars: &[Var]) -> Result<(), TrainError> {
        for ((buf, state), var) in buffers.into_iter().zip(&mut self.states).zip(vars) {
            if let Some(g) = grads.get(*var) {
                state.update(buf, g)?;
            }
        }
        Ok(())
    }

    /// Update with explicitly supplied dense gradients.
    pub fn step_raw(&mut self, buffers: Vec<&mut Vec<f64>>, grads: &[Vec<f64>]) -> Result<(), TrainError> {
        for ((buf, state), g) in buffers.into_iter().zip(&mut self.states).zip(grads) {
            state.update(buf, g)?;
        }
        Ok(())
    }
}
