use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptEmbedding;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("cosine oracle needs a non-zero target")]
    ZeroTarget,
    #[error("prompt width {found} differs from target width {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("{0}")]
    Failed(String),
}

/// Scores a prompt; lower is better. Must be deterministic in
/// `(prompt, noise_key)`.
pub trait ScoringOracle {
    fn evaluate(&self, prompt: &PromptEmbedding, noise_key: u64) -> Result<f64, OracleError>;
}

impl<F> ScoringOracle for F
where
    F: Fn(&PromptEmbedding, u64) -> Result<f64, OracleError>,
{
    fn evaluate(&self, prompt: &PromptEmbedding, noise_key: u64) -> Result<f64, OracleError> {
        self(prompt, noise_key)
    }
}

/// Mean of the three pseudo-token embeddings.
pub fn pool(prompt: &PromptEmbedding) -> DVector<f64> {
    let [a, b, c] = prompt.pseudo_tokens();
    (a + b + c) / 3.0
}

fn check(target: &DVector<f64>, prompt: &PromptEmbedding) -> Result<(), OracleError> {
    if prompt.dim() != target.len() {
        return Err(OracleError::Dimension {
            expected: target.len(),
            found: prompt.dim(),
        });
    }
    Ok(())
}

fn cosine_loss(target: &DVector<f64>, prompt: &PromptEmbedding) -> Result<f64, OracleError> {
    check(target, prompt)?;
    let p = pool(prompt);
    let n = p.norm() * target.norm();
    if n == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - p.dot(target) / n)
}

/// FNV-1a over the bit patterns of the pseudo-token entries.
pub fn prompt_hash(prompt: &PromptEmbedding) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for slot in prompt.pseudo_tokens() {
        for x in slot.iter() {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

/// `‖pool(e) − t‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticOracle {
    pub target: DVector<f64>,
}

impl ScoringOracle for QuadraticOracle {
    fn evaluate(&self, prompt: &PromptEmbedding, _noise_key: u64) -> Result<f64, OracleError> {
        check(&self.target, prompt)?;
        Ok((pool(prompt) - &self.target).norm_squared())
    }
}

/// `1 − cos(pool(e), t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineOracle {
    target: DVector<f64>,
}

impl CosineOracle {
    pub fn new(target: DVector<f64>) -> Result<Self, OracleError> {
        if target.iter().all(|&x| x == 0.0) {
            return Err(OracleError::ZeroTarget);
        }
        Ok(Self { target })
    }
}

impl ScoringOracle for CosineOracle {
    fn evaluate(&self, prompt: &PromptEmbedding, _noise_key: u64) -> Result<f64, OracleError> {
        cosine_loss(&self.target, prompt)
    }
}

/// Cosine loss plus Gaussian noise seeded by the prompt hash and the
/// noise key.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyProxyOracle {
    cosine: CosineOracle,
    pub noise_std: f64,
}

impl NoisyProxyOracle {
    pub fn new(target: DVector<f64>, noise_std: f64) -> Result<Self, OracleError> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(OracleError::Failed("noise std must be finite and non-negative".into()));
        }
        Ok(Self {
            cosine: CosineOracle::new(target)?,
            noise_std,
        })
    }
}

impl ScoringOracle for NoisyProxyOracle {
    fn evaluate(&self, prompt: &PromptEmbedding, noise_key: u64) -> Result<f64, OracleError> {
        let base = self.cosine.evaluate(prompt, noise_key)?;
        let mut rng = ChaCha8Rng::seed_from_u64(prompt_hash(prompt) ^ noise_key.rotate_left(17));
        let z: f64 = StandardNormal.sample(&mut rng);
        Ok(base + self.noise_std * z)
    }
}

/// Built-in oracle selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    Quadratic {},
    Cosine {},
    NoisyProxy { noise_std: f64 },
}

/// Instantiates a built-in oracle against `target`.
pub fn builtin_oracle(spec: &OracleSpec, target: DVector<f64>) -> Result<Box<dyn ScoringOracle>, OracleError> {
    Ok(match spec {
        OracleSpec::Quadratic {} => Box::new(QuadraticOracle { target }),
        OracleSpec::Cosine {} => Box::new(CosineOracle::new(target)?),
        OracleSpec::NoisyProxy { noise_std } => Box::new(NoisyProxyOracle::new(target, *noise_std)?),
    })
}
