//! Quantitative measures over the stories of a run.
//!
//! Everything here is generic over [`Scalar`](crate::Scalar) and pure: the
//! same inputs give bit-identical outputs regardless of thread scheduling.

mod creativity;
mod metrics;
mod sentiment;
mod text;
mod tfidf;

pub use creativity::{creativity, Embeddings};
pub use metrics::{
    aggregate, first_generation_similarity, similarity_series, successive_similarity,
    within_generation_similarity, AggregatedSeries, MetricSeries, FIRST_GENERATION, SUCCESSIVE,
    WITHIN_GENERATION,
};
pub use sentiment::{sentiment, Lexicon, Sentiment};
pub use text::{extract_keywords, tokenize, word_chains, Keyword, Stopwords, WordChain, WordChains};
pub use tfidf::{similarity_matrix, SimilarityMatrix, SparseVector, VectorSpace};

use thiserror::Error;

/// Default number of keywords kept per story.
pub const DEFAULT_KEYWORDS: usize = 10;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("cannot fit a vector space on an empty corpus")]
    EmptyCorpus,
    #[error("generation {generation} out of range (run has {n_generations} generations)")]
    GenerationOutOfRange { generation: usize, n_generations: usize },
    #[error("matrix of size {size} does not split into generations of {n_agents} stories")]
    Shape { size: usize, n_agents: usize },
    #[error("no word embeddings configured")]
    MissingEmbeddings,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
