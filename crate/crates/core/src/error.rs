//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- gateway ---
    #[error("user prompt is empty")]
    EmptyPrompt,
    #[error("no backend configured for role {role}")]
    NoBackend { role: String },
    #[error("no recorded response for digest {digest} (replay-strict)")]
    MissingRecording { digest: String },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limit exhausted after {attempts} attempt(s): {message}")]
    RateLimited { attempts: u32, message: String },
    #[error("backend rejected request: {0}")]
    Backend(String),
    #[error("structured output invalid after {attempts} attempt(s): {message}")]
    StructuredParse { attempts: u32, message: String },

    // --- embeddings ---
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("zero vector has no direction; refusing to normalize")]
    ZeroVector,
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding backend failure: {0}")]
    Embedding(String),

    // --- templates ---
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{name}` left placeholder {placeholder} unresolved")]
    UnresolvedPlaceholder { name: String, placeholder: String },

    // --- planning ---
    #[error("strategy model produced {got} of {want} strategies after top-up")]
    StrategyShortfall { want: usize, got: usize },
    #[error("hybrid parents must be two distinct strategies")]
    DuplicateParents,
    #[error("candidate {joke} references unknown strategy {strategy}")]
    OrphanCandidate { joke: String, strategy: String },

    // --- trace parsing ---
    #[error("expected {expected} reasoning steps, found {found}")]
    StepCountMismatch { expected: usize, found: usize },
    #[error("model output has no `JOKE:` line")]
    MissingJokeMarker,
    #[error("trace is malformed: {0}")]
    MalformedTrace(String),
    #[error("joke generation failed after {attempts} attempt(s): {message}")]
    GenerationExhausted { attempts: u32, message: String },

    // --- scoring ---
    #[error("score weights must sum to 1 (got {0})")]
    WeightSum(f64),
    #[error("signal out of range: {0}")]
    SignalRange(String),

    // --- knowledge graph ---
    #[error("knowledge graph checksum mismatch (file corrupt)")]
    KgChecksum,
    #[error("knowledge graph schema version {found} unsupported (expected {expected})")]
    KgVersion { expected: String, found: String },
    #[error("knowledge graph integrity violation: {0}")]
    KgIntegrity(String),

    // --- orchestration ---
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("tournament needs at least 2 jokes, got {0}")]
    TournamentTooSmall(usize),
    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    // --- io / serialization ---
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Attach a pipeline stage name, preserving the original error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Wrap an io error together with the path that produced it.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures that a retry may fix (transport and rate limits).
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Transport { .. } | Error::RateLimited { .. } | Error::Embedding(_)
        )
    }
}
