//! Prompt-embedding inversion: a vocabulary-derived PCA subspace, a
//! three-token prompt template and a CMA-ES search over subspace
//! coefficients against a black-box scoring oracle.

pub mod cma;
pub mod init;
pub mod optimize;
pub mod oracle;
pub mod pca;
pub mod prompt;
pub mod vocab;

use thiserror::Error;

pub use cma::{cma_step, population_size, CmaState};
pub use init::{
    init_token, mean_row_std, random_token, similarity_weights, weighted_token, InitOptions, TokenKind,
    DEFAULT_TEMPERATURE, DEFAULT_TOP_K,
};
pub use optimize::{optimize_embedding, write_trace, InversionResult, OptimizeOptions, TraceRow, TRACE_HEADER};
pub use oracle::{
    builtin_oracle, pool, prompt_hash, CosineOracle, NoisyProxyOracle, OracleError, OracleSpec, QuadraticOracle,
    ScoringOracle,
};
pub use pca::{pca_fit, EmbeddingSubspace};
pub use prompt::{assemble_prompt, PromptEmbedding, PSEUDO_SLOTS, TEMPLATE};
pub use vocab::{read_query, read_vocabulary, write_vectors, write_vocabulary, Vocabulary};

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("query embedding is zero")]
    ZeroQuery,
    #[error("carrier word {0:?} is not in the vocabulary")]
    MissingCarrier(String),
    #[error("non-finite fitness for sample {index} in generation {generation}")]
    NonFiniteFitness { generation: usize, index: usize },
    #[error("generation {generation}: {reason}")]
    Degenerate { generation: usize, reason: &'static str },
    #[error("oracle failed in generation {generation}: {source}")]
    Oracle { generation: usize, source: OracleError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
