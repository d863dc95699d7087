//! Plan-search humor generation pipeline.
//!
//! The pipeline turns a topic into a ranked list of joke candidates:
//! a strategy model proposes diverse humor strategies (plus pairwise
//! hybrids and adaptations of historical high performers from a
//! knowledge graph), a generation model executes style-specific
//! chain-of-thought templates per strategy, near-duplicate jokes are
//! filtered by embedding similarity, and a judge model scores the
//! survivors through four signals fused into a single hybrid score.
//! An optional revision loop partitions strategies by performance and
//! rewrites the weak ones from judge suggestions.

pub mod config;
pub mod embedding;
pub mod error;
pub mod gateway;
pub mod hucot;
pub mod kg;
pub mod novelty;
pub mod pipeline;
pub mod planner;
pub mod report;
pub mod revision;
pub mod scoring;
pub mod stats;
pub mod templates;

pub use config::{
    ConfigVariant, EmbeddingConfig, GatewayConfig, NoveltyConfig, PipelineConfig, PlanConfig,
    RevisionConfig, ScoreWeights,
};
pub use embedding::{cosine, Embedder, EmbeddingVector, HashedEmbedder, MemoEmbedder};
pub use error::{Error, Result};
pub use gateway::{Cassette, CassetteMode, ChatBackend, ChatRequest, ChatResponse, Gateway, ModelRole};
pub use hucot::{HucotTemplate, HucotTrace, HumorStyle, JokeCandidate};
pub use kg::{KgEdge, KgNode, KgQuery, KnowledgeGraph};
pub use novelty::FilterReport;
pub use pipeline::{run_pipeline, ExperimentSpec, Services};
pub use planner::{Strategy, StrategyOrigin, Topic};
pub use report::{ComparisonReport, RunReport};
pub use revision::{IterationRecord, StrategyPerformance};
pub use scoring::{HybridScore, NormalizedSignals, Persona, ScoredJoke, SignalScores};
