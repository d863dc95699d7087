//! Configuration types and the TOML config file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{CassetteMode, ModelRole, RetryPolicy};

/// Per-role model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for RoleConfig {
    fn default() -> Self {
        RoleConfig {
            model: String::new(),
            temperature: 0.7,
            max_tokens: 1024,
        }
    }
}

/// Chat backend settings: endpoint, per-role models, retries, cassette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key_env: String,
    pub cassette_mode: CassetteMode,
    pub cassette_path: String,
    pub retry: RetryPolicy,
    /// Repair rounds for structured-output extraction.
    pub structured_retries: u32,
    pub strategy: RoleConfig,
    pub generation: RoleConfig,
    pub judge: RoleConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            base_url: "https://api.groq.com/openai/v1".to_string(),
            api_key_env: "HUMORGEN_API_KEY".to_string(),
            cassette_mode: CassetteMode::Live,
            cassette_path: "cassette.json".to_string(),
            retry: RetryPolicy::default(),
            structured_retries: 2,
            strategy: RoleConfig {
                model: "gemma2-9b-it".to_string(),
                temperature: 0.9,
                max_tokens: 2048,
            },
            generation: RoleConfig {
                model: "llama-3.3-70b-versatile".to_string(),
                temperature: 0.8,
                max_tokens: 1024,
            },
            judge: RoleConfig {
                model: "llama3-70b-8192".to_string(),
                temperature: 0.2,
                max_tokens: 512,
            },
        }
    }
}

impl GatewayConfig {
    pub fn role(&self, role: ModelRole) -> &RoleConfig {
        match role {
            ModelRole::Strategy => &self.strategy,
            ModelRole::Generation => &self.generation,
            ModelRole::Judge => &self.judge,
        }
    }
}

/// Which embedder backs the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    /// `deterministic-test` (offline feature hashing) or `external-service`.
    pub kind: String,
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: "deterministic-test".to_string(),
            base_url: String::new(),
            model: "all-MiniLM-L6-v2".to_string(),
            api_key_env: "HUMORGEN_API_KEY".to_string(),
        }
    }
}

/// Strategy-pool sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub n_first_order: usize,
    pub max_hybrids: usize,
    pub kg_limit: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            n_first_order: 12,
            max_hybrids: 9,
            kg_limit: 3,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_first_order == 0 {
            return Err(Error::Config("plan.n_first_order must be >= 1".into()));
        }
        let pairs = self.n_first_order * (self.n_first_order - 1) / 2;
        if self.max_hybrids > pairs {
            return Err(Error::Config(format!(
                "plan.max_hybrids {} exceeds C({}, 2) = {pairs}",
                self.max_hybrids, self.n_first_order
            )));
        }
        Ok(())
    }
}

/// Near-duplicate removal threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoveltyConfig {
    pub threshold: f64,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        NoveltyConfig { threshold: 0.75 }
    }
}

impl NoveltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.5) {
            return Err(Error::Config(format!(
                "novelty.threshold must lie in (0, 1.5], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Weights fusing the four evaluation signals. Must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreWeights {
    pub w_direct: f64,
    pub w_persona: f64,
    pub w_pairwise: f64,
    pub w_relevance: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            w_direct: 0.25,
            w_persona: 0.25,
            w_pairwise: 0.25,
            w_relevance: 0.25,
        }
    }
}

impl ScoreWeights {
    pub fn sum(&self) -> f64 {
        self.w_direct + self.w_persona + self.w_pairwise + self.w_relevance
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("w_direct", self.w_direct),
            ("w_persona", self.w_persona),
            ("w_pairwise", self.w_pairwise),
            ("w_relevance", self.w_relevance),
        ] {
            if !(w >= 0.0) {
                return Err(Error::Config(format!("weights.{name} must be >= 0, got {w}")));
            }
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::WeightSum(sum));
        }
        Ok(())
    }
}

/// What feeds per-strategy performance: the fused hybrid score or the
/// multi-persona signal alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PerformanceSource {
    #[default]
    Hybrid,
    PersonaOnly,
}

/// Revision-loop thresholds and bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisionConfig {
    pub max_iterations: u32,
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub improvement_threshold: f64,
    pub retain_midband: bool,
    pub performance_source: PerformanceSource,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig {
            max_iterations: 2,
            low_threshold: 6.0,
            high_threshold: 7.0,
            improvement_threshold: 0.2,
            retain_midband: false,
            performance_source: PerformanceSource::Hybrid,
        }
    }
}

impl RevisionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.low_threshold > self.high_threshold {
            return Err(Error::Config(format!(
                "revision.low_threshold {} exceeds high_threshold {}",
                self.low_threshold, self.high_threshold
            )));
        }
        if !(self.improvement_threshold >= 0.0) {
            return Err(Error::Config(
                "revision.improvement_threshold must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// The named experiment configurations over (use_kg, use_revision).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfigVariant {
    Baseline,
    KgOnly,
    RevisionOnly,
    KgRevision,
}

impl ConfigVariant {
    pub const ALL: [ConfigVariant; 4] = [
        ConfigVariant::Baseline,
        ConfigVariant::KgOnly,
        ConfigVariant::RevisionOnly,
        ConfigVariant::KgRevision,
    ];

    pub fn flags(&self) -> (bool, bool) {
        match self {
            ConfigVariant::Baseline => (false, false),
            ConfigVariant::KgOnly => (true, false),
            ConfigVariant::RevisionOnly => (false, true),
            ConfigVariant::KgRevision => (true, true),
        }
    }

    pub fn from_flags(use_kg: bool, use_revision: bool) -> Self {
        match (use_kg, use_revision) {
            (false, false) => ConfigVariant::Baseline,
            (true, false) => ConfigVariant::KgOnly,
            (false, true) => ConfigVariant::RevisionOnly,
            (true, true) => ConfigVariant::KgRevision,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ConfigVariant::Baseline => "baseline",
            ConfigVariant::KgOnly => "kg-only",
            ConfigVariant::RevisionOnly => "revision-only",
            ConfigVariant::KgRevision => "kg-revision",
        }
    }
}

impl std::fmt::Display for ConfigVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything one pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub use_kg: bool,
    pub use_revision: bool,
    pub plan: PlanConfig,
    pub novelty: NoveltyConfig,
    pub weights: ScoreWeights,
    pub revision: RevisionConfig,
    pub seed: i64,
    pub max_parallel_calls: usize,
    pub jokes_per_strategy: usize,
    /// Directory of prompt template files; empty string selects the
    /// built-in templates.
    pub template_dir: String,
    pub kg_path: String,
    pub cassette_path: String,
    pub gateway: GatewayConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            use_kg: false,
            use_revision: false,
            plan: PlanConfig::default(),
            novelty: NoveltyConfig::default(),
            weights: ScoreWeights::default(),
            revision: RevisionConfig::default(),
            seed: 0,
            max_parallel_calls: 4,
            jokes_per_strategy: 1,
            template_dir: String::new(),
            kg_path: "kg.json".to_string(),
            cassette_path: "cassette.json".to_string(),
            gateway: GatewayConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = toml::from_str(&raw)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.novelty.validate()?;
        self.weights.validate()?;
        self.revision.validate()?;
        if self.max_parallel_calls == 0 {
            return Err(Error::Config("max_parallel_calls must be >= 1".into()));
        }
        if self.jokes_per_strategy == 0 {
            return Err(Error::Config("jokes_per_strategy must be >= 1".into()));
        }
        match self.embedding.kind.as_str() {
            "deterministic-test" => {}
            "external-service" => {
                if self.embedding.base_url.is_empty() {
                    return Err(Error::Config(
                        "embedding.base_url required for external-service".into(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "embedding.kind must be deterministic-test or external-service, got {other}"
                )))
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> ConfigVariant {
        ConfigVariant::from_flags(self.use_kg, self.use_revision)
    }

    /// Copy of this config with the variant's flags applied. The gateway
    /// cassette path follows `cassette_path` so one file serves a whole
    /// experiment.
    pub fn with_variant(&self, variant: ConfigVariant) -> Self {
        let (use_kg, use_revision) = variant.flags();
        let mut config = self.clone();
        config.use_kg = use_kg;
        config.use_revision = use_revision;
        config
    }
}
