use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cma::{cma_step, population_size, CmaState};
use crate::oracle::ScoringOracle;
use crate::pca::EmbeddingSubspace;
use crate::prompt::PromptEmbedding;
use crate::InversionError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    /// Initial step size; defaults to the root mean of the subspace
    /// eigenvalues.
    pub sigma0: Option<f64>,
    /// Population size; defaults to [`population_size`].
    pub population: Option<usize>,
    /// Noise key handed to every oracle call; defaults to the seed.
    pub noise_key: Option<u64>,
    /// Optimize one pseudo-token at a time, splitting the budget evenly,
    /// instead of all three jointly.
    pub sequential: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    /// Best loss seen so far.
    pub best_loss: f64,
    /// Step size after the generation's update.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionResult {
    /// Best candidate found.
    pub prompt: PromptEmbedding,
    /// Subspace coefficients of the best candidate, one vector per
    /// pseudo-token.
    pub coefficients: Vec<DVector<f64>>,
    pub best_loss: f64,
    /// Loss of the starting prompt.
    pub initial_loss: f64,
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
}

pub const TRACE_HEADER: &str = "generation,best_loss,sigma";

pub fn write_trace<W: Write>(trace: &[TraceRow], out: &mut W) -> Result<(), InversionError> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(out, "{},{:e},{:e}", r.generation, r.best_loss, r.sigma)?;
    }
    Ok(())
}

fn decode(base: &PromptEmbedding, subspace: &EmbeddingSubspace, slots: &[usize], q: &[f64], out: &mut PromptEmbedding) {
    let d = subspace.dim();
    for (k, &slot) in slots.iter().enumerate() {
        let e = base.pseudo(slot) + subspace.lift(&q[k * d..(k + 1) * d]);
        out.set_pseudo(slot, e).expect("subspace width matches the prompt");
    }
}

/// Minimizes `oracle(e₀ + W_p Q)` over the subspace coefficients `Q` of
/// the pseudo-tokens with CMA-ES, keeping the best candidate ever
/// evaluated. The noise key stays fixed for the whole run.
pub fn optimize_embedding(
    oracle: &dyn ScoringOracle,
    base: &PromptEmbedding,
    subspace: &EmbeddingSubspace,
    budget: usize,
    seed: u64,
    options: &OptimizeOptions,
) -> Result<InversionResult, InversionError> {
    if budget == 0 {
        return Err(InversionError::InvalidArgument("budget must be at least one generation".into()));
    }
    if subspace.ambient_dim() != base.dim() {
        return Err(InversionError::DimensionMismatch {
            expected: base.dim(),
            found: subspace.ambient_dim(),
        });
    }
    let d = subspace.dim();
    let key = options.noise_key.unwrap_or(seed);
    let sigma0 = options.sigma0.unwrap_or_else(|| {
        (subspace.eigenvalues.iter().sum::<f64>() / d as f64).sqrt()
    });
    let call = |p: &PromptEmbedding, generation: usize| {
        oracle
            .evaluate(p, key)
            .map_err(|source| InversionError::Oracle { generation, source })
    };
    let initial_loss = call(base, 0)?;
    let rounds: Vec<Vec<usize>> = if options.sequential {
        (0..3).map(|k| vec![k]).collect()
    } else {
        vec![vec![0, 1, 2]]
    };
    let per_round = budget.div_ceil(rounds.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefficients = vec![DVector::zeros(d); 3];
    let mut best_prompt = base.clone();
    let mut best_loss = f64::INFINITY;
    let mut trace = Vec::with_capacity(budget);
    let mut evaluations = 1;
    for slots in rounds {
        let generations = per_round.min(budget - trace.len());
        if generations == 0 {
            break;
        }
        let start = best_prompt.clone();
        let start_coefficients = coefficients.clone();
        let n = slots.len() * d;
        let lambda = options.population.unwrap_or_else(|| population_size(n));
        let mut state = CmaState::with_population(DVector::zeros(n), sigma0, lambda)?;
        let mut candidate = start.clone();
        for _ in 0..generations {
            let generation = trace.len();
            let population = state.sample(&mut rng).to_vec();
            let mut fitness = Vec::with_capacity(population.len());
            for q in &population {
                decode(&start, subspace, &slots, q.as_slice(), &mut candidate);
                let f = call(&candidate, generation)?;
                evaluations += 1;
                if f < best_loss {
                    best_loss = f;
                    best_prompt = candidate.clone();
                    coefficients = start_coefficients.clone();
                    for (k, &slot) in slots.iter().enumerate() {
                        coefficients[slot] += DVector::from_column_slice(&q.as_slice()[k * d..(k + 1) * d]);
                    }
                }
                fitness.push(f);
            }
            cma_step(&mut state, &fitness).map_err(|e| match e {
                InversionError::NonFiniteFitness { index, .. } => InversionError::NonFiniteFitness { generation, index },
                other => other,
            })?;
            trace.push(TraceRow {
                generation,
                best_loss,
                sigma: state.sigma,
            });
        }
    }
    Ok(InversionResult {
        prompt: best_prompt,
        coefficients,
        best_loss,
        initial_loss,
        trace,
        evaluations,
    })
}
