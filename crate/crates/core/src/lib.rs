//! Cultural evolution of text in populations of text-generating agents.
//!
//! Agents sit on a social network. At generation 0 every agent answers an
//! initialization prompt; at every later generation each agent receives the
//! stories its neighbors wrote in the previous generation, wrapped in a
//! transformation prompt, and writes a new story. The analysis side turns a
//! run into TF-IDF cosine similarity matrices, homogenization metrics, word
//! chains, force-directed layouts, creativity and sentiment series.
//!
//! The numeric modules ([`analytics`], [`layout`]) are generic over
//! [`Scalar`]; the engine and the on-disk results use `f64` through the
//! aliases exported here.

pub mod agents;
pub mod analytics;
pub mod backend;
pub mod engine;
pub mod layout;
pub mod results;
pub mod scalar;
pub mod topology;

pub use agents::{AgentSpec, PersonalityAssignment, PromptLibrary, PromptSet, Story};
pub use backend::{
    Backend, BackendConfig, BackendError, BackendKind, GenerationContext, GenerationParams,
    MockRule, TextGenerator,
};
pub use engine::{EngineError, SimulationConfig, SimulationResult};
pub use scalar::Scalar;
pub use topology::{Schedule, Topology, TopologyError, TopologyKind};

/// Similarity matrix over `f64`, the precision used for persisted results.
pub type SimilarityMatrix = analytics::SimilarityMatrix<f64>;
pub type VectorSpace = analytics::VectorSpace<f64>;
pub type SparseVector = analytics::SparseVector<f64>;
pub type MetricSeries = analytics::MetricSeries<f64>;
pub type AggregatedSeries = analytics::AggregatedSeries<f64>;
pub type Embeddings = analytics::Embeddings<f64>;
pub type Lexicon = analytics::Lexicon<f64>;
pub type Sentiment = analytics::Sentiment<f64>;
pub type LayoutGraph = layout::LayoutGraph<f64>;

/// Single-precision variants, useful when matrices get large.
pub type SimilarityMatrixF32 = analytics::SimilarityMatrix<f32>;
pub type LayoutGraphF32 = layout::LayoutGraph<f32>;
