//! Persistent strategy knowledge graph.
//!
//! Nodes hold a strategy's text, style, originating topic (with its
//! embedding), and a performance history across runs. Typed edges record
//! lineage. The whole graph lives in one JSON file with a version and a
//! checksum over the canonically-ordered body, so saves are byte-stable
//! and partial writes are detected on load.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{cosine, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelRole};
use crate::hucot::HumorStyle;
use crate::planner::{complete_title_description, Strategy, StrategyOrigin, Topic, STRATEGY_DUP_THRESHOLD};
use crate::revision::StrategyPerformance;
use crate::templates::TemplateStore;

pub const KG_SCHEMA_VERSION: &str = "1";

/// One run's performance observation for a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEntry {
    pub run_id: String,
    pub p_s: f64,
    pub timestamp: u64,
}

/// A stored strategy with its performance history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgNode {
    pub node_id: String,
    /// Title and description, newline-separated.
    pub strategy_text: String,
    pub style: HumorStyle,
    pub topic_text: String,
    pub topic_embedding: EmbeddingVector,
    pub performance_history: Vec<PerformanceEntry>,
    /// Arithmetic mean of the history, recomputed on every append.
    pub mean_performance: f64,
}

impl KgNode {
    fn recompute_mean(&mut self) {
        let total: f64 = self.performance_history.iter().map(|e| e.p_s).sum();
        self.mean_performance = total / self.performance_history.len() as f64;
    }
}

/// Lineage edge kinds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeType {
    HybridOf,
    AdaptedFrom,
    RevisedFrom,
    SameTopic,
}

/// A typed, directed edge. `(edge_type, from, to)` is unique and
/// self-loops are rejected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KgEdge {
    pub edge_type: EdgeType,
    pub from_id: String,
    pub to_id: String,
}

/// Retrieval filter: style match, a minimum mean performance, and a
/// relevance ranking against the query topic embedding.
#[derive(Debug, Clone)]
pub struct KgQuery {
    pub style: HumorStyle,
    pub topic_embedding: EmbeddingVector,
    pub min_mean_performance: f64,
    pub limit: usize,
}

impl KgQuery {
    pub fn new(style: HumorStyle, topic_embedding: EmbeddingVector) -> Self {
        KgQuery {
            style,
            topic_embedding,
            min_mean_performance: 7.0,
            limit: 3,
        }
    }
}

/// The in-memory graph. Nodes are keyed by id; edges form an ordered set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, KgNode>,
    edges: BTreeSet<KgEdge>,
}

/// On-disk form: header fields plus sorted node/edge arrays.
#[derive(Debug, Serialize, Deserialize)]
struct KgFile {
    version: String,
    checksum: String,
    nodes: Vec<KgNode>,
    edges: Vec<KgEdge>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: &str) -> Option<&KgNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &KgNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &KgEdge> {
        self.edges.iter()
    }

    /// Insert a node, rejecting duplicate ids.
    pub fn insert_node(&mut self, node: KgNode) -> Result<()> {
        if node.performance_history.is_empty() {
            return Err(Error::KgIntegrity(format!(
                "node {} has an empty performance history",
                node.node_id
            )));
        }
        if self.nodes.contains_key(&node.node_id) {
            return Err(Error::KgIntegrity(format!(
                "duplicate node_id {}",
                node.node_id
            )));
        }
        self.nodes.insert(node.node_id.clone(), node);
        Ok(())
    }

    /// Insert an edge; both endpoints must exist and self-loops are
    /// rejected. Re-inserting an existing edge is a no-op.
    pub fn insert_edge(&mut self, edge: KgEdge) -> Result<()> {
        if edge.from_id == edge.to_id {
            return Err(Error::KgIntegrity(format!(
                "self-loop on {}",
                edge.from_id
            )));
        }
        for endpoint in [&edge.from_id, &edge.to_id] {
            if !self.nodes.contains_key(endpoint) {
                return Err(Error::KgIntegrity(format!(
                    "edge endpoint {endpoint} does not resolve"
                )));
            }
        }
        self.edges.insert(edge);
        Ok(())
    }

    /// Drop nodes with mean performance below `min_mean` along with their
    /// incident edges. Returns how many nodes were removed.
    pub fn prune_below(&mut self, min_mean: f64) -> usize {
        let doomed: Vec<String> = self
            .nodes
            .values()
            .filter(|n| n.mean_performance < min_mean)
            .map(|n| n.node_id.clone())
            .collect();
        for id in &doomed {
            self.nodes.remove(id);
        }
        self.edges
            .retain(|e| self.nodes.contains_key(&e.from_id) && self.nodes.contains_key(&e.to_id));
        doomed.len()
    }

    /// Full integrity check: edge endpoints resolve, no self-loops,
    /// histories non-empty, means consistent, embeddings unit-norm.
    pub fn validate(&self) -> Result<()> {
        for edge in &self.edges {
            if edge.from_id == edge.to_id {
                return Err(Error::KgIntegrity(format!("self-loop on {}", edge.from_id)));
            }
            for endpoint in [&edge.from_id, &edge.to_id] {
                if !self.nodes.contains_key(endpoint) {
                    return Err(Error::KgIntegrity(format!(
                        "edge endpoint {endpoint} does not resolve"
                    )));
                }
            }
        }
        for node in self.nodes.values() {
            if node.performance_history.is_empty() {
                return Err(Error::KgIntegrity(format!(
                    "node {} has an empty performance history",
                    node.node_id
                )));
            }
            let mean: f64 = node.performance_history.iter().map(|e| e.p_s).sum::<f64>()
                / node.performance_history.len() as f64;
            if (mean - node.mean_performance).abs() > 1e-9 {
                return Err(Error::KgIntegrity(format!(
                    "node {} mean {} disagrees with history mean {mean}",
                    node.node_id, node.mean_performance
                )));
            }
            node.topic_embedding.validate()?;
        }
        Ok(())
    }

    fn checksum(version: &str, nodes: &[KgNode], edges: &[KgEdge]) -> Result<String> {
        #[derive(Serialize)]
        struct Body<'a> {
            version: &'a str,
            nodes: &'a [KgNode],
            edges: &'a [KgEdge],
        }
        let body = serde_json::to_vec(&Body {
            version,
            nodes,
            edges,
        })?;
        Ok(hex::encode(Sha256::digest(&body)))
    }

    /// Write the graph to `path`. Key order is canonical, so re-saving an
    /// unchanged graph reproduces the file byte for byte.
    pub fn save(&self, path: &Path) -> Result<()> {
        let nodes: Vec<KgNode> = self.nodes.values().cloned().collect();
        let edges: Vec<KgEdge> = self.edges.iter().cloned().collect();
        let checksum = Self::checksum(KG_SCHEMA_VERSION, &nodes, &edges)?;
        let file = KgFile {
            version: KG_SCHEMA_VERSION.to_string(),
            checksum,
            nodes,
            edges,
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let mut body = serde_json::to_string_pretty(&file)?;
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    /// Load and fully validate a graph file: schema version, checksum,
    /// duplicate ids, referential integrity.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: KgFile = serde_json::from_str(&raw)?;
        if file.version != KG_SCHEMA_VERSION {
            return Err(Error::KgVersion {
                expected: KG_SCHEMA_VERSION.to_string(),
                found: file.version,
            });
        }
        let expected = Self::checksum(&file.version, &file.nodes, &file.edges)?;
        if expected != file.checksum {
            return Err(Error::KgChecksum);
        }
        let mut graph = KnowledgeGraph::new();
        for node in file.nodes {
            graph.insert_node(node)?;
        }
        for edge in file.edges {
            graph.insert_edge(edge)?;
        }
        graph.validate()?;
        Ok(graph)
    }

    /// Load, treating a missing file as an empty graph.
    pub fn load_or_empty(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(KnowledgeGraph::new())
        }
    }
}

fn node_id_for(style: HumorStyle, strategy_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(style.as_str().as_bytes());
    hasher.update(b"\x00");
    hasher.update(strategy_text.as_bytes());
    format!("kgn-{}", &hex::encode(hasher.finalize())[..12])
}

/// Fold one run's results into the graph: a node per strategy with a
/// defined `p_s` (matched to an existing node at strategy-text similarity
/// >= 0.95 and equal style, else created), the p_s appended to its
/// history, and lineage edges written where both endpoints resolve.
pub fn upsert_run_results(
    graph: &mut KnowledgeGraph,
    strategies: &[Strategy],
    perfs: &[StrategyPerformance],
    topic: &Topic,
    run_id: &str,
    timestamp: u64,
    embedder: &dyn Embedder,
) -> Result<()> {
    graph.validate()?;
    let topic_embedding = embedder.embed(&topic.text)?;
    // strategy id -> node id, for lineage edges among this run's strategies.
    let mut node_of: BTreeMap<String, String> = BTreeMap::new();

    for strategy in strategies {
        let Some(p_s) = perfs
            .iter()
            .find(|p| p.strategy_id == strategy.id)
            .and_then(|p| p.p_s)
        else {
            continue;
        };
        let text = strategy.strategy_text();
        let vector = embedder.embed(&text)?;

        let mut matched: Option<(String, f64)> = None;
        for node in graph.nodes.values() {
            if node.style != strategy.style {
                continue;
            }
            let sim = cosine(&vector, &embedder.embed(&node.strategy_text)?)?;
            if sim >= STRATEGY_DUP_THRESHOLD
                && matched.as_ref().map_or(true, |(_, best)| sim > *best)
            {
                matched = Some((node.node_id.clone(), sim));
            }
        }

        let node_id = match matched {
            Some((node_id, _)) => {
                let node = graph.nodes.get_mut(&node_id).expect("matched node exists");
                node.performance_history.push(PerformanceEntry {
                    run_id: run_id.to_string(),
                    p_s,
                    timestamp,
                });
                node.recompute_mean();
                node_id
            }
            None => {
                let node_id = node_id_for(strategy.style, &text);
                let mut node = KgNode {
                    node_id: node_id.clone(),
                    strategy_text: text,
                    style: strategy.style,
                    topic_text: topic.text.clone(),
                    topic_embedding: topic_embedding.clone(),
                    performance_history: vec![PerformanceEntry {
                        run_id: run_id.to_string(),
                        p_s,
                        timestamp,
                    }],
                    mean_performance: 0.0,
                };
                node.recompute_mean();
                graph.insert_node(node)?;
                node_id
            }
        };
        node_of.insert(strategy.id.clone(), node_id);
    }

    // Lineage edges; written only when both endpoints have nodes.
    for strategy in strategies {
        let Some(from) = node_of.get(&strategy.id) else {
            continue;
        };
        match &strategy.origin {
            StrategyOrigin::FirstOrder => {}
            StrategyOrigin::Hybrid { parents } => {
                for parent in parents {
                    if let Some(to) = node_of.get(parent) {
                        add_edge_checked(graph, EdgeType::HybridOf, from, to)?;
                    }
                }
            }
            StrategyOrigin::KgAdapted { source_node } => {
                if graph.nodes.contains_key(source_node) {
                    add_edge_checked(graph, EdgeType::AdaptedFrom, from, source_node)?;
                }
            }
            StrategyOrigin::Revised { original, .. } => {
                if let Some(to) = node_of.get(original) {
                    add_edge_checked(graph, EdgeType::RevisedFrom, from, to)?;
                }
            }
        }
    }

    // Same-topic edges among this run's nodes, one direction only.
    let run_nodes: Vec<&String> = node_of.values().collect();
    for (i, a) in run_nodes.iter().enumerate() {
        for b in run_nodes.iter().skip(i + 1) {
            if a != b {
                let (from, to) = if a <= b { (a, b) } else { (b, a) };
                add_edge_checked(graph, EdgeType::SameTopic, from, to)?;
            }
        }
    }
    Ok(())
}

fn add_edge_checked(
    graph: &mut KnowledgeGraph,
    edge_type: EdgeType,
    from: &str,
    to: &str,
) -> Result<()> {
    if from == to {
        return Ok(()); // matching can map two strategies to one node
    }
    graph.insert_edge(KgEdge {
        edge_type,
        from_id: from.to_string(),
        to_id: to.to_string(),
    })
}

/// Retrieve high performers: style match and mean >= the floor, ranked by
/// `mean × max(0, cos(query topic, node topic))` descending, ties by
/// node id, truncated to the limit.
pub fn retrieve_high_performers(graph: &KnowledgeGraph, query: &KgQuery) -> Result<Vec<KgNode>> {
    let mut ranked: Vec<(f64, &KgNode)> = Vec::new();
    for node in graph.nodes.values() {
        if node.style != query.style || node.mean_performance < query.min_mean_performance {
            continue;
        }
        let relevance = cosine(&query.topic_embedding, &node.topic_embedding)?.max(0.0);
        ranked.push((node.mean_performance * relevance, node));
    }
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.node_id.cmp(&b.1.node_id))
    });
    Ok(ranked
        .into_iter()
        .take(query.limit)
        .map(|(_, node)| node.clone())
        .collect())
}

/// Rewrite a retrieved node's strategy for a new topic via the strategy
/// model. The result carries `kg-adapted` lineage back to the node.
pub fn adapt(
    node: &KgNode,
    topic: &Topic,
    id: String,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<Strategy> {
    let prompt = templates.render(
        "adapt",
        &[
            ("style", topic.style.as_str()),
            ("topic", topic.text.as_str()),
            ("strategy", node.strategy_text.as_str()),
        ],
    )?;
    let request = gateway.request(
        ModelRole::Strategy,
        "You adapt proven humor strategies to new topics. Reply with exactly the \
         JSON object requested and nothing else.",
        prompt,
    );
    let (title, description) = complete_title_description(gateway, &request, "plan.kg_adapt")?;
    Ok(Strategy {
        id,
        title,
        description,
        origin: StrategyOrigin::KgAdapted {
            source_node: node.node_id.clone(),
        },
        topic_id: topic.id.clone(),
        style: topic.style,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashedEmbedder;

    fn node(id: &str, style: HumorStyle, mean_targets: &[f64], topic_words: &str) -> KgNode {
        let embedder = HashedEmbedder::new();
        let mut n = KgNode {
            node_id: id.into(),
            strategy_text: format!("Strategy {id}\ndescription for {id}"),
            style,
            topic_text: topic_words.into(),
            topic_embedding: embedder.embed(topic_words).unwrap(),
            performance_history: mean_targets
                .iter()
                .enumerate()
                .map(|(i, p)| PerformanceEntry {
                    run_id: format!("run-{i}"),
                    p_s: *p,
                    timestamp: 1_700_000_000 + i as u64,
                })
                .collect(),
            mean_performance: 0.0,
        };
        n.recompute_mean();
        n
    }

    fn strategy(id: &str, title: &str, description: &str) -> Strategy {
        Strategy {
            id: id.into(),
            title: title.into(),
            description: description.into(),
            origin: StrategyOrigin::FirstOrder,
            topic_id: "t".into(),
            style: HumorStyle::Generic,
        }
    }

    fn topic() -> Topic {
        Topic {
            id: "t".into(),
            text: "office pantry politics".into(),
            style: HumorStyle::Generic,
        }
    }

    fn perf(id: &str, p_s: Option<f64>) -> StrategyPerformance {
        StrategyPerformance {
            strategy_id: id.into(),
            p_s,
            n_jokes: usize::from(p_s.is_some()),
        }
    }

    #[test]
    fn new_strategy_creates_a_node_with_single_entry_history() {
        let mut graph = KnowledgeGraph::new();
        let embedder = HashedEmbedder::new();
        upsert_run_results(
            &mut graph,
            &[strategy("a", "Angle", "joke about meetings")],
            &[perf("a", Some(7.2))],
            &topic(),
            "run-1",
            1_700_000_000,
            &embedder,
        )
        .unwrap();
        assert_eq!(graph.node_count(), 1);
        let node = graph.nodes().next().unwrap();
        assert_eq!(node.performance_history.len(), 1);
        assert_eq!(node.mean_performance, 7.2);
    }

    #[test]
    fn rerun_appends_history_and_updates_mean() {
        let mut graph = KnowledgeGraph::new();
        let embedder = HashedEmbedder::new();
        let s = strategy("a", "Angle", "joke about meetings");
        upsert_run_results(
            &mut graph,
            std::slice::from_ref(&s),
            &[perf("a", Some(7.2))],
            &topic(),
            "run-1",
            1,
            &embedder,
        )
        .unwrap();
        upsert_run_results(
            &mut graph,
            &[s],
            &[perf("a", Some(6.8))],
            &topic(),
            "run-2",
            2,
            &embedder,
        )
        .unwrap();
        assert_eq!(graph.node_count(), 1);
        let node = graph.nodes().next().unwrap();
        assert_eq!(node.performance_history.len(), 2);
        assert!((node.mean_performance - 7.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_performance_writes_no_node() {
        let mut graph = KnowledgeGraph::new();
        upsert_run_results(
            &mut graph,
            &[strategy("a", "Angle", "desc")],
            &[perf("a", None)],
            &topic(),
            "run-1",
            1,
            &HashedEmbedder::new(),
        )
        .unwrap();
        assert_eq!(graph.node_count(), 0);
    }

    #[test]
    fn lineage_edges_land_between_run_nodes() {
        let mut graph = KnowledgeGraph::new();
        let a = strategy("a", "Alpha", "first approach entirely");
        let b = strategy("b", "Beta", "second unrelated tactic");
        let hybrid = Strategy {
            id: "h".into(),
            title: "Gamma fusion".into(),
            description: "joins both mechanisms somehow".into(),
            origin: StrategyOrigin::Hybrid {
                parents: ["a".into(), "b".into()],
            },
            topic_id: "t".into(),
            style: HumorStyle::Generic,
        };
        upsert_run_results(
            &mut graph,
            &[a, b, hybrid],
            &[perf("a", Some(7.0)), perf("b", Some(8.0)), perf("h", Some(9.0))],
            &topic(),
            "run-1",
            1,
            &HashedEmbedder::new(),
        )
        .unwrap();
        let hybrid_edges = graph
            .edges()
            .filter(|e| e.edge_type == EdgeType::HybridOf)
            .count();
        assert_eq!(hybrid_edges, 2);
        let same_topic = graph
            .edges()
            .filter(|e| e.edge_type == EdgeType::SameTopic)
            .count();
        assert_eq!(same_topic, 3); // C(3,2)
        graph.validate().unwrap();
    }

    #[test]
    fn retrieval_filters_ranks_and_truncates() {
        let mut graph = KnowledgeGraph::new();
        let shared_topic = "weekend grocery runs";
        graph
            .insert_node(node("A", HumorStyle::Generic, &[8.2], shared_topic))
            .unwrap();
        graph
            .insert_node(node("B", HumorStyle::Generic, &[5.1], shared_topic))
            .unwrap();
        graph
            .insert_node(node("C", HumorStyle::Generic, &[7.4], shared_topic))
            .unwrap();
        let query = KgQuery {
            style: HumorStyle::Generic,
            topic_embedding: HashedEmbedder::new().embed(shared_topic).unwrap(),
            min_mean_performance: 7.0,
            limit: 2,
        };
        let hits = retrieve_high_performers(&graph, &query).unwrap();
        let ids: Vec<&str> = hits.iter().map(|n| n.node_id.as_str()).collect();
        assert_eq!(ids, vec!["A", "C"]);
    }

    #[test]
    fn retrieval_on_empty_graph_and_zero_limit() {
        let graph = KnowledgeGraph::new();
        let query = KgQuery::new(
            HumorStyle::Generic,
            HashedEmbedder::new().embed("whatever").unwrap(),
        );
        assert!(retrieve_high_performers(&graph, &query).unwrap().is_empty());

        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("A", HumorStyle::Generic, &[9.0], "topic"))
            .unwrap();
        let query = KgQuery {
            limit: 0,
            ..KgQuery::new(HumorStyle::Generic, HashedEmbedder::new().embed("topic").unwrap())
        };
        assert!(retrieve_high_performers(&graph, &query).unwrap().is_empty());
    }

    #[test]
    fn style_mismatch_is_never_retrieved() {
        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("A", HumorStyle::Indian, &[9.5], "topic"))
            .unwrap();
        let query = KgQuery::new(
            HumorStyle::Generic,
            HashedEmbedder::new().embed("topic").unwrap(),
        );
        assert!(retrieve_high_performers(&graph, &query).unwrap().is_empty());
    }

    #[test]
    fn save_load_round_trip_is_structural_and_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.json");
        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("n1", HumorStyle::Generic, &[7.0, 8.0], "topic one"))
            .unwrap();
        graph
            .insert_node(node("n2", HumorStyle::Indian, &[6.0], "topic two"))
            .unwrap();
        graph
            .insert_node(node("n3", HumorStyle::Generic, &[9.0], "topic three"))
            .unwrap();
        graph
            .insert_edge(KgEdge {
                edge_type: EdgeType::SameTopic,
                from_id: "n1".into(),
                to_id: "n2".into(),
            })
            .unwrap();
        graph
            .insert_edge(KgEdge {
                edge_type: EdgeType::HybridOf,
                from_id: "n3".into(),
                to_id: "n1".into(),
            })
            .unwrap();

        graph.save(&path).unwrap();
        let loaded = KnowledgeGraph::load(&path).unwrap();
        assert_eq!(loaded, graph);

        let bytes_first = std::fs::read(&path).unwrap();
        loaded.save(&path).unwrap();
        let bytes_second = std::fs::read(&path).unwrap();
        assert_eq!(bytes_first, bytes_second);
    }

    #[test]
    fn corrupted_checksum_fails_to_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.json");
        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("n1", HumorStyle::Generic, &[7.0], "topic"))
            .unwrap();
        graph.save(&path).unwrap();
        let tampered = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"p_s\": 7.0", "\"p_s\": 9.0");
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(KnowledgeGraph::load(&path), Err(Error::KgChecksum)));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.json");
        let graph = KnowledgeGraph::new();
        graph.save(&path).unwrap();
        let tampered = std::fs::read_to_string(&path)
            .unwrap()
            .replacen("\"version\": \"1\"", "\"version\": \"99\"", 1);
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(
            KnowledgeGraph::load(&path),
            Err(Error::KgVersion { .. }) | Err(Error::KgChecksum)
        ));
    }

    #[test]
    fn empty_graph_file_loads_as_empty_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.json");
        KnowledgeGraph::new().save(&path).unwrap();
        let graph = KnowledgeGraph::load(&path).unwrap();
        assert_eq!(graph.node_count(), 0);
        assert_eq!(graph.edge_count(), 0);
    }

    #[test]
    fn edges_require_resolvable_endpoints_and_no_self_loops() {
        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("n1", HumorStyle::Generic, &[7.0], "topic"))
            .unwrap();
        assert!(graph
            .insert_edge(KgEdge {
                edge_type: EdgeType::SameTopic,
                from_id: "n1".into(),
                to_id: "ghost".into(),
            })
            .is_err());
        assert!(graph
            .insert_edge(KgEdge {
                edge_type: EdgeType::SameTopic,
                from_id: "n1".into(),
                to_id: "n1".into(),
            })
            .is_err());
    }

    #[test]
    fn duplicate_node_ids_are_rejected_before_mutation() {
        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("n1", HumorStyle::Generic, &[7.0], "topic"))
            .unwrap();
        let err = graph
            .insert_node(node("n1", HumorStyle::Generic, &[8.0], "other"))
            .unwrap_err();
        assert!(matches!(err, Error::KgIntegrity(_)));
        assert_eq!(graph.node_count(), 1);
    }

    #[test]
    fn prune_drops_weak_nodes_and_their_edges() {
        let mut graph = KnowledgeGraph::new();
        graph
            .insert_node(node("keep", HumorStyle::Generic, &[8.0], "a"))
            .unwrap();
        graph
            .insert_node(node("drop", HumorStyle::Generic, &[4.0], "b"))
            .unwrap();
        graph
            .insert_edge(KgEdge {
                edge_type: EdgeType::SameTopic,
                from_id: "drop".into(),
                to_id: "keep".into(),
            })
            .unwrap();
        assert_eq!(graph.prune_below(6.0), 1);
        assert_eq!(graph.node_count(), 1);
        assert_eq!(graph.edge_count(), 0);
        graph.validate().unwrap();
    }

    #[test]
    fn mean_stays_consistent_through_appends() {
        let mut graph = KnowledgeGraph::new();
        let embedder = HashedEmbedder::new();
        let s = strategy("a", "Angle", "desc");
        for (i, p) in [7.0, 8.0, 6.0, 9.0].iter().enumerate() {
            upsert_run_results(
                &mut graph,
                std::slice::from_ref(&s),
                &[perf("a", Some(*p))],
                &topic(),
                &format!("run-{i}"),
                i as u64,
                &embedder,
            )
            .unwrap();
            graph.validate().unwrap();
        }
        let node = graph.nodes().next().unwrap();
        assert!((node.mean_performance - 7.5).abs() < 1e-9);
    }
}
