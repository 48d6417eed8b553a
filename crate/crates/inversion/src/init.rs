use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::vocab::Vocabulary;
use crate::InversionError;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_TOP_K: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Style,
    Object,
    Etc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitOptions {
    pub temperature: f64,
    pub top_k: usize,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_k: DEFAULT_TOP_K,
        }
    }
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.norm() * b.norm();
    if n == 0.0 {
        0.0
    } else {
        a.dot(b) / n
    }
}

/// Softmax of `scores / temperature` over the `top_k` highest scores
/// (lower index first on ties). Returns `(row, weight)` pairs.
pub fn similarity_weights(scores: &[f64], temperature: f64, top_k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(top_k.max(1));
    let top = scores[order[0]] / temperature;
    let exps: Vec<f64> = order.iter().map(|&i| (scores[i] / temperature - top).exp()).collect();
    let sum: f64 = exps.iter().sum();
    order.into_iter().zip(exps).map(|(i, e)| (i, e / sum)).collect()
}

/// Similarity-weighted mix of vocabulary rows.
pub fn weighted_token(query: &DVector<f64>, vocab: &Vocabulary, options: &InitOptions) -> Result<DVector<f64>, InversionError> {
    if query.len() != vocab.dim() {
        return Err(InversionError::DimensionMismatch {
            expected: vocab.dim(),
            found: query.len(),
        });
    }
    if query.iter().any(|x| !x.is_finite()) {
        return Err(InversionError::InvalidArgument("query embedding is not finite".into()));
    }
    if query.iter().all(|&x| x == 0.0) {
        return Err(InversionError::ZeroQuery);
    }
    if !(options.temperature > 0.0) || options.top_k == 0 {
        return Err(InversionError::InvalidArgument("temperature and top_k must be positive".into()));
    }
    let scores: Vec<f64> = (0..vocab.len()).map(|i| cosine(query, &vocab.row(i))).collect();
    let mut out = DVector::zeros(vocab.dim());
    for (i, w) in similarity_weights(&scores, options.temperature, options.top_k) {
        out += vocab.row(i) * w;
    }
    Ok(out)
}

/// Mean over rows of each row's standard deviation across components.
pub fn mean_row_std(vocab: &Vocabulary) -> f64 {
    let e = vocab.embeddings();
    let d = e.ncols() as f64;
    e.row_iter()
        .map(|r| {
            let m = r.sum() / d;
            (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d).sqrt()
        })
        .sum::<f64>()
        / e.nrows() as f64
}

/// Seeded Gaussian token with componentwise std [`mean_row_std`].
pub fn random_token(vocab: &Vocabulary, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, mean_row_std(vocab)).expect("finite non-negative std");
    DVector::from_fn(vocab.dim(), |_, _| normal.sample(&mut rng))
}

/// Initial value of one pseudo-token slot. Style and object tokens mix
/// the vocabulary by similarity to `query`; the residual token is random.
pub fn init_token(
    query: Option<&DVector<f64>>,
    vocab: &Vocabulary,
    kind: TokenKind,
    options: &InitOptions,
    seed: u64,
) -> Result<DVector<f64>, InversionError> {
    match kind {
        TokenKind::Etc => Ok(random_token(vocab, seed)),
        TokenKind::Style | TokenKind::Object => {
            let q = query.ok_or_else(|| InversionError::InvalidArgument(format!("{kind:?} token needs a query embedding")))?;
            weighted_token(q, vocab, options)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn vocab(rows: &[&[f64]]) -> Vocabulary {
        let d = rows[0].len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Vocabulary::new(
            (0..rows.len()).map(|i| format!("w{i}")).collect(),
            DMatrix::from_row_slice(rows.len(), d, &data),
        )
        .unwrap()
    }

    #[test]
    fn top_one_returns_that_row() {
        let v = vocab(&[&[1.0, 0.0], &[0.0, 3.0]]);
        for t in [0.01, 1.0, 100.0] {
            let opts = InitOptions { temperature: t, top_k: 1 };
            let e = weighted_token(&DVector::from_vec(vec![0.0, 1.0]), &v, &opts).unwrap();
            assert_eq!(e.as_slice(), &[0.0, 3.0]);
        }
    }

    #[test]
    fn equal_similarity_gives_the_mean() {
        let v = vocab(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, -1.0]]);
        let opts = InitOptions { temperature: 0.1, top_k: 2 };
        let e = weighted_token(&DVector::from_vec(vec![2.0, 2.0]), &v, &opts).unwrap();
        assert!((e - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-15);
    }

    #[test]
    fn softmax_of_scaled_similarities() {
        let w = similarity_weights(&[0.1, 0.9], 0.1, 2);
        assert_eq!(w[0].0, 1);
        let expected = 1.0 / (1.0 + (-8.0f64).exp());
        assert!((w[0].1 - expected).abs() < 1e-15);
        assert!((w[0].1 - 0.99967).abs() < 1e-5);
        assert!((w[1].1 - 0.00034).abs() < 1e-5);
    }

    #[test]
    fn zero_query_is_rejected() {
        let v = vocab(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            weighted_token(&DVector::zeros(2), &v, &InitOptions::default()),
            Err(InversionError::ZeroQuery)
        ));
    }

    #[test]
    fn residual_token_is_seeded_with_vocabulary_scale() {
        let v = vocab(&[&[1.0, -1.0, 1.0, -1.0], &[2.0, 0.0, 2.0, 0.0]]);
        assert_eq!(mean_row_std(&v), 1.0);
        let a = init_token(None, &v, TokenKind::Etc, &InitOptions::default(), 5).unwrap();
        let b = init_token(None, &v, TokenKind::Etc, &InitOptions::default(), 5).unwrap();
        assert_eq!(a, b);
        assert!(init_token(None, &v, TokenKind::Style, &InitOptions::default(), 5).is_err());
    }
}
