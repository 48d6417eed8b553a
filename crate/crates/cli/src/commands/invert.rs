use std::path::Path;

use flexfit_inversion::{
    assemble_prompt, builtin_oracle, init_token, optimize_embedding, pca_fit, pool, read_query, read_vocabulary,
    write_trace, write_vectors, EmbeddingSubspace, PromptEmbedding, TokenKind, Vocabulary,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{create_out, open, write_file, Metrics};
use crate::config::{resolve, InvertConfig, VectorSource, VocabSource};
use crate::error::CliError;

pub const EMBEDDING_FILE: &str = "embedding.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";

/// Gaussian embedding table holding the template's carrier words and
/// `words − 3` generated tokens `w3, w4, …`.
pub fn synthetic_vocabulary(words: usize, dim: usize, seed: u64) -> Result<Vocabulary, CliError> {
    if words < 4 || dim == 0 {
        return Err(CliError::Config("a synthetic vocabulary needs at least 4 words and a positive width".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tokens: Vec<String> = ["a", "image", "of"].map(String::from).to_vec();
    tokens.extend((3..words).map(|i| format!("w{i}")));
    let table = DMatrix::from_fn(words, dim, |_, _| StandardNormal.sample(&mut rng));
    Ok(Vocabulary::new(tokens, table)?)
}

fn vocabulary(source: &VocabSource, base: &Path) -> Result<Vocabulary, CliError> {
    match source {
        VocabSource::File(p) => {
            let path = resolve(base, p);
            read_vocabulary(open(&path)?).map_err(|e| CliError::input(&path, e))
        }
        VocabSource::Synthetic { words, dim, seed } => synthetic_vocabulary(*words, *dim, *seed),
    }
}

fn vector(
    source: &VectorSource,
    base: &Path,
    vocab: &Vocabulary,
    context: Option<(&PromptEmbedding, &EmbeddingSubspace)>,
) -> Result<DVector<f64>, CliError> {
    match source {
        VectorSource::File(p) => {
            let path = resolve(base, p);
            read_query(open(&path)?).map_err(|e| CliError::input(&path, e))
        }
        VectorSource::Token(t) => vocab
            .embedding(t)
            .ok_or_else(|| CliError::Config(format!("token {t:?} is not in the vocabulary"))),
        VectorSource::Reachable { seed, scale } => {
            let (prompt, sub) = context.ok_or_else(|| CliError::Config("queries cannot be `reachable`".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let q: Vec<f64> = (0..sub.dim())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect();
            Ok(pool(prompt) + sub.lift(&q))
        }
    }
}

/// Subspace fit, token initialization and CMA-ES search. Writes the three
/// optimized pseudo-token embeddings (one line each), the best-loss trace
/// and a metrics table into `config.out`.
pub fn invert(config: &InvertConfig, base: &Path) -> Result<Metrics, CliError> {
    let vocab = vocabulary(&config.vocabulary, base)?;
    let subspace = pca_fit(vocab.embeddings(), config.subspace_dim)?;
    let style_q = vector(&config.style_query, base, &vocab, None)?;
    let object_q = vector(&config.object_query, base, &vocab, None)?;
    let style = init_token(Some(&style_q), &vocab, TokenKind::Style, &config.init, config.seed)?;
    let object = init_token(Some(&object_q), &vocab, TokenKind::Object, &config.init, config.seed)?;
    let etc = init_token(None, &vocab, TokenKind::Etc, &config.init, config.seed)?;
    let prompt = assemble_prompt(style, object, etc, &vocab)?;
    let target = vector(&config.target, base, &vocab, Some((&prompt, &subspace)))?;
    if target.len() != vocab.dim() {
        return Err(CliError::Config(format!(
            "oracle target has {} entries, the vocabulary {}",
            target.len(),
            vocab.dim()
        )));
    }
    let oracle = builtin_oracle(&config.oracle, target).map_err(|e| CliError::Config(e.to_string()))?;
    let out = create_out(&config.out)?;
    let result = optimize_embedding(oracle.as_ref(), &prompt, &subspace, config.budget, config.seed, &config.optimizer)?;

    let slots: Vec<DVector<f64>> = result.prompt.pseudo_tokens().into_iter().cloned().collect();
    write_file(&out.join(EMBEDDING_FILE), |w| write_vectors(&slots, w).map_err(std::io::Error::other))?;
    write_file(&out.join(TRACE_FILE), |w| write_trace(&result.trace, w).map_err(std::io::Error::other))?;
    let mut metrics = Metrics::default();
    metrics.push("initial_loss", result.initial_loss, "oracle");
    metrics.push("best_loss", result.best_loss, "oracle");
    metrics.push("generations", result.trace.len(), "optimizer");
    metrics.push("evaluations", result.evaluations, "optimizer");
    if let Some(last) = result.trace.last() {
        metrics.push("final_sigma", last.sigma, "optimizer");
    }
    metrics.write(&out.join(METRICS_FILE))?;
    Ok(metrics)
}
