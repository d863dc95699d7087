//! Strategy-pool construction: first-order strategies, pairwise hybrids,
//! and de-duplicated pool assembly.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PlanConfig;
use crate::embedding::{cosine, Embedder};
use crate::error::{Error, Result};
use crate::gateway::{FieldSpec, Gateway, ModelRole};
use crate::hucot::HumorStyle;
use crate::templates::TemplateStore;

/// Similarity at or above which two strategy descriptions count as the
/// same strategy during pool assembly and KG matching.
pub const STRATEGY_DUP_THRESHOLD: f64 = 0.95;

const SYSTEM_STRATEGY: &str = "You are a comedy strategist. You design humor \
strategies: named comedic angles with the mechanism that makes them funny. \
You always reply with exactly the JSON object requested and nothing else.";

/// The subject a run generates jokes about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub text: String,
    pub style: HumorStyle,
}

impl Topic {
    /// Topic with an id derived from the text, stable across runs.
    pub fn from_text(text: &str, style: HumorStyle) -> Result<Self> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(Error::Config("topic text is empty".into()));
        }
        use sha2::{Digest, Sha256};
        let hash = Sha256::digest(trimmed.as_bytes());
        Ok(Topic {
            id: format!("t-{}", &hex::encode(hash)[..8]),
            text: trimmed.to_string(),
            style,
        })
    }
}

/// Where a strategy came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyOrigin {
    FirstOrder,
    Hybrid { parents: [String; 2] },
    KgAdapted { source_node: String },
    Revised { original: String, round: u32 },
}

/// A named humor approach: premise, mechanism, angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub id: String,
    pub title: String,
    pub description: String,
    pub origin: StrategyOrigin,
    pub topic_id: String,
    pub style: HumorStyle,
}

impl Strategy {
    /// Combined text used for embeddings and KG identity.
    pub fn strategy_text(&self) -> String {
        format!("{}\n{}", self.title, self.description)
    }

    /// One-line form for prompts.
    pub fn prompt_text(&self) -> String {
        format!("{}: {}", self.title, self.description)
    }
}

/// Check that every parent/source referenced inside `pool` resolves within
/// the pool itself or the provided KG node ids.
pub fn validate_lineage(pool: &[Strategy], kg_node_ids: &[String]) -> Result<()> {
    let ids: std::collections::HashSet<&str> = pool.iter().map(|s| s.id.as_str()).collect();
    for strategy in pool {
        match &strategy.origin {
            StrategyOrigin::FirstOrder => {}
            StrategyOrigin::Hybrid { parents } => {
                for p in parents {
                    if !ids.contains(p.as_str()) {
                        return Err(Error::Config(format!(
                            "hybrid {} references missing parent {p}",
                            strategy.id
                        )));
                    }
                }
            }
            StrategyOrigin::KgAdapted { source_node } => {
                if !kg_node_ids.iter().any(|n| n == source_node) {
                    return Err(Error::Config(format!(
                        "adapted strategy {} references missing KG node {source_node}",
                        strategy.id
                    )));
                }
            }
            StrategyOrigin::Revised { original, .. } => {
                if original.is_empty() {
                    return Err(Error::Config(format!(
                        "revised strategy {} has no original",
                        strategy.id
                    )));
                }
            }
        }
    }
    Ok(())
}

fn parse_strategy_items(value: &Value) -> Vec<(String, String)> {
    let Some(items) = value.as_array() else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|item| {
            let title = item.get("title")?.as_str()?.trim().to_string();
            let description = item.get("description")?.as_str()?.trim().to_string();
            (!title.is_empty() && !description.is_empty()).then_some((title, description))
        })
        .collect()
}

/// Ask the strategy model for exactly `n` first-order strategies. When the
/// model under-delivers, one top-up request fills the gap; still falling
/// short is an error.
pub fn generate_first_order(
    topic: &Topic,
    n: usize,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<Vec<Strategy>> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let mut collected: Vec<(String, String)> = Vec::new();
    for round in 0..2 {
        let missing = n - collected.len();
        let existing = if collected.is_empty() {
            "(none yet)".to_string()
        } else {
            collected
                .iter()
                .map(|(t, _)| format!("- {t}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let prompt = templates.render(
            "first_order",
            &[
                ("topic", &topic.text),
                ("style", topic.style.as_str()),
                ("n", &missing.to_string()),
                ("existing", &existing),
            ],
        )?;
        let request = gateway.request(ModelRole::Strategy, SYSTEM_STRATEGY, prompt);
        let map = gateway.complete_structured(
            &request,
            &[FieldSpec::array("strategies")],
            "plan.first_order",
        )?;
        for (title, description) in parse_strategy_items(&map["strategies"]) {
            let duplicate = collected
                .iter()
                .any(|(t, _)| t.eq_ignore_ascii_case(&title));
            if !duplicate && collected.len() < n {
                collected.push((title, description));
            }
        }
        if collected.len() >= n {
            break;
        }
        if round == 1 {
            return Err(Error::StrategyShortfall {
                want: n,
                got: collected.len(),
            });
        }
    }
    Ok(collected
        .into_iter()
        .enumerate()
        .map(|(i, (title, description))| Strategy {
            id: format!("fo-{:02}", i + 1),
            title,
            description,
            origin: StrategyOrigin::FirstOrder,
            topic_id: topic.id.clone(),
            style: topic.style,
        })
        .collect())
}

/// Pick up to `max_hybrids` unordered strategy pairs, most-dissimilar
/// first (1 - cosine of description embeddings), ties broken by the
/// lexicographic id pair.
pub fn select_hybrid_pairs<'a>(
    pool: &'a [Strategy],
    max_hybrids: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<(&'a Strategy, &'a Strategy)>> {
    if max_hybrids == 0 || pool.len() < 2 {
        return Ok(Vec::new());
    }
    let vectors: Vec<_> = pool
        .iter()
        .map(|s| embedder.embed(&s.strategy_text()))
        .collect::<Result<_>>()?;

    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..pool.len() {
        for j in (i + 1)..pool.len() {
            let dissimilarity = 1.0 - cosine(&vectors[i], &vectors[j])?;
            scored.push((dissimilarity, i, j));
        }
    }
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            let ka = id_pair(&pool[a.1].id, &pool[a.2].id);
            let kb = id_pair(&pool[b.1].id, &pool[b.2].id);
            ka.cmp(&kb)
        })
    });
    Ok(scored
        .into_iter()
        .take(max_hybrids)
        .map(|(_, i, j)| (&pool[i], &pool[j]))
        .collect())
}

fn id_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Fuse two distinct parent strategies into one hybrid strategy.
pub fn synthesize_hybrid(
    pair: (&Strategy, &Strategy),
    topic: &Topic,
    id: String,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<Strategy> {
    let (a, b) = pair;
    if a.id == b.id {
        return Err(Error::DuplicateParents);
    }
    let prompt = templates.render(
        "hybrid",
        &[
            ("topic", &topic.text),
            ("style", topic.style.as_str()),
            ("parent_a", &a.prompt_text()),
            ("parent_b", &b.prompt_text()),
        ],
    )?;
    let request = gateway.request(ModelRole::Strategy, SYSTEM_STRATEGY, prompt);
    let (title, description) = complete_title_description(gateway, &request, "plan.hybrid")?;
    Ok(Strategy {
        id,
        title,
        description,
        origin: StrategyOrigin::Hybrid {
            parents: [a.id.clone(), b.id.clone()],
        },
        topic_id: topic.id.clone(),
        style: topic.style,
    })
}

/// Shared extraction for replies of the form `{"title": ..., "description": ...}`.
pub(crate) fn complete_title_description(
    gateway: &Gateway,
    request: &crate::gateway::ChatRequest,
    label: &str,
) -> Result<(String, String)> {
    let fields = [FieldSpec::string("title"), FieldSpec::string("description")];
    gateway.complete_validated(request, &fields, label, |map| {
        let title = map["title"].as_str().unwrap_or_default().trim().to_string();
        let description = map["description"]
            .as_str()
            .unwrap_or_default()
            .trim()
            .to_string();
        if title.is_empty() || description.is_empty() {
            return Err("title and description must be non-empty".into());
        }
        Ok((title, description))
    })
}

/// Concatenate first-order, hybrid, and KG-adapted strategies, dropping
/// later entries whose descriptions embed within `STRATEGY_DUP_THRESHOLD`
/// of an earlier entry.
pub fn assemble_pool(
    first_order: Vec<Strategy>,
    hybrids: Vec<Strategy>,
    kg_strategies: Vec<Strategy>,
    embedder: &dyn Embedder,
) -> Result<Vec<Strategy>> {
    let mut pool: Vec<Strategy> = Vec::new();
    let mut kept_vectors: Vec<crate::embedding::EmbeddingVector> = Vec::new();
    for strategy in first_order
        .into_iter()
        .chain(hybrids)
        .chain(kg_strategies)
    {
        let vector = embedder.embed(&strategy.strategy_text())?;
        let mut duplicate = false;
        for kept in &kept_vectors {
            if cosine(kept, &vector)? >= STRATEGY_DUP_THRESHOLD {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            pool.push(strategy);
            kept_vectors.push(vector);
        }
    }
    Ok(pool)
}

/// Plan the full pool for a topic: first-order generation, hybrid
/// synthesis over the most-dissimilar pairs, then assembly with the
/// KG-adapted strategies.
pub fn plan_pool(
    topic: &Topic,
    config: &PlanConfig,
    kg_strategies: Vec<Strategy>,
    gateway: &Gateway,
    embedder: &dyn Embedder,
    templates: &TemplateStore,
    parallel: &crate::pipeline::Parallelism,
) -> Result<Vec<Strategy>> {
    config.validate()?;
    let first_order = generate_first_order(topic, config.n_first_order, gateway, templates)?;
    let pairs = select_hybrid_pairs(&first_order, config.max_hybrids, embedder)?;
    let jobs: Vec<(usize, (&Strategy, &Strategy))> = pairs.into_iter().enumerate().collect();
    let hybrids: Vec<Strategy> = parallel
        .run(jobs, |(i, pair)| {
            synthesize_hybrid(pair, topic, format!("hy-{:02}", i + 1), gateway, templates)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    assemble_pool(first_order, hybrids, kg_strategies, embedder)
}
