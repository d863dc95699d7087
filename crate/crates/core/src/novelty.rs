//! Greedy semantic de-duplication of joke candidates.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::config::NoveltyConfig;
use crate::embedding::{cosine, Embedder, EmbeddingVector};
use crate::error::Result;
use crate::hucot::JokeCandidate;

/// A candidate dropped by the filter, with the kept neighbor that
/// triggered the removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedCandidate {
    pub id: String,
    pub nearest_kept: String,
    pub similarity: f64,
}

/// Outcome of one filter pass. Kept and removed ids partition the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FilterReport {
    pub kept: Vec<String>,
    pub removed: Vec<RemovedCandidate>,
    pub threshold_used: f64,
}

impl FilterReport {
    pub fn contains_kept(&self, id: &str) -> bool {
        self.kept.iter().any(|k| k == id)
    }
}

/// Walk candidates in input order, keeping each one iff its maximum cosine
/// similarity to every previously kept candidate stays below the
/// threshold. The first candidate is always kept; removal is closed at
/// the threshold (`similarity >= threshold` removes).
pub fn filter(
    candidates: &[JokeCandidate],
    embedder: &dyn Embedder,
    config: &NoveltyConfig,
) -> Result<FilterReport> {
    let texts: Vec<(&str, &str)> = candidates
        .iter()
        .map(|c| (c.id.as_str(), c.text.as_str()))
        .collect();
    filter_texts(&texts, embedder, config)
}

/// Same pass, but candidates are pre-ordered by a caller-supplied priority
/// (higher first, ties by id) so the preferred duplicate survives.
pub fn filter_by_priority(
    candidates: &[JokeCandidate],
    priority: &BTreeMap<String, f64>,
    embedder: &dyn Embedder,
    config: &NoveltyConfig,
) -> Result<FilterReport> {
    let mut ordered: Vec<&JokeCandidate> = candidates.iter().collect();
    ordered.sort_by(|a, b| {
        let pa = priority.get(&a.id).copied().unwrap_or(f64::NEG_INFINITY);
        let pb = priority.get(&b.id).copied().unwrap_or(f64::NEG_INFINITY);
        pb.total_cmp(&pa).then_with(|| a.id.cmp(&b.id))
    });
    let texts: Vec<(&str, &str)> = ordered
        .iter()
        .map(|c| (c.id.as_str(), c.text.as_str()))
        .collect();
    filter_texts(&texts, embedder, config)
}

fn filter_texts(
    candidates: &[(&str, &str)],
    embedder: &dyn Embedder,
    config: &NoveltyConfig,
) -> Result<FilterReport> {
    config.validate()?;
    let mut report = FilterReport {
        threshold_used: config.threshold,
        ..FilterReport::default()
    };
    let mut kept_vectors: Vec<(usize, EmbeddingVector)> = Vec::new();
    for (index, (id, text)) in candidates.iter().enumerate() {
        let vector = embedder.embed(text)?;
        let mut worst: Option<(usize, f64)> = None;
        for (kept_index, kept_vector) in &kept_vectors {
            let sim = cosine(kept_vector, &vector)?;
            if worst.map_or(true, |(_, best)| sim > best) {
                worst = Some((*kept_index, sim));
            }
        }
        match worst {
            Some((kept_index, sim)) if sim >= config.threshold => {
                report.removed.push(RemovedCandidate {
                    id: id.to_string(),
                    nearest_kept: candidates[kept_index].0.to_string(),
                    similarity: sim,
                });
            }
            _ => {
                report.kept.push(id.to_string());
                kept_vectors.push((index, vector));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{FixedEmbedder, HashedEmbedder};
    use crate::hucot::{HucotTrace, HumorStyle};

    fn candidate(id: &str, text: &str) -> JokeCandidate {
        JokeCandidate {
            id: id.into(),
            text: text.into(),
            trace: HucotTrace {
                steps: vec![("1".into(), "step".into())],
            },
            strategy_id: "s".into(),
            topic_id: "t".into(),
            iteration: 0,
            style: HumorStyle::Generic,
        }
    }

    #[test]
    fn identical_texts_remove_the_second_at_similarity_one() {
        let candidates = vec![
            candidate("j1", "same exact joke text"),
            candidate("j2", "same exact joke text"),
        ];
        let report = filter(
            &candidates,
            &HashedEmbedder::new(),
            &NoveltyConfig { threshold: 0.75 },
        )
        .unwrap();
        assert_eq!(report.kept, vec!["j1"]);
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.removed[0].id, "j2");
        assert_eq!(report.removed[0].nearest_kept, "j1");
        assert!((report.removed[0].similarity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_trace_matches_pinned_similarities() {
        // sim(1,2)=0.8, sim(1,3)=0.5, sim(2,3)=0.9 → kept {1,3}, removed {2 vs 1 @ 0.8}.
        let y2 = (1.0f64 - 0.64).sqrt();
        let x3 = 0.5f64;
        let y3 = (0.9 - 0.8 * x3) / y2;
        let z3 = (1.0 - x3 * x3 - y3 * y3).sqrt();
        let embedder = FixedEmbedder::new(vec![
            ("one", vec![1.0, 0.0, 0.0]),
            ("two", vec![0.8, y2, 0.0]),
            ("three", vec![x3, y3, z3]),
        ])
        .unwrap();
        let candidates = vec![
            candidate("j1", "one"),
            candidate("j2", "two"),
            candidate("j3", "three"),
        ];
        let report = filter(&candidates, &embedder, &NoveltyConfig { threshold: 0.75 }).unwrap();
        assert_eq!(report.kept, vec!["j1", "j3"]);
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.removed[0].id, "j2");
        assert_eq!(report.removed[0].nearest_kept, "j1");
        assert!((report.removed[0].similarity - 0.8).abs() < 1e-9);
    }

    #[test]
    fn threshold_above_max_cosine_keeps_everything() {
        let candidates = vec![
            candidate("j1", "same words"),
            candidate("j2", "same words"),
            candidate("j3", "same words"),
        ];
        let report = filter(
            &candidates,
            &HashedEmbedder::new(),
            &NoveltyConfig { threshold: 1.01 },
        )
        .unwrap();
        assert_eq!(report.kept.len(), 3);
        assert!(report.removed.is_empty());
    }

    #[test]
    fn empty_input_yields_empty_report() {
        let report = filter(&[], &HashedEmbedder::new(), &NoveltyConfig::default()).unwrap();
        assert!(report.kept.is_empty());
        assert!(report.removed.is_empty());
    }

    #[test]
    fn kept_and_removed_partition_the_input() {
        let embedder = HashedEmbedder::new();
        let texts = [
            "office coffee is a personality test",
            "office coffee is a personality test",
            "the printer only works on demo day",
            "standup meetings that could be a nap",
            "the printer only works on demo day",
        ];
        let candidates: Vec<JokeCandidate> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| candidate(&format!("j{i}"), t))
            .collect();
        let report = filter(&candidates, &embedder, &NoveltyConfig::default()).unwrap();
        let mut all: Vec<String> = report.kept.clone();
        all.extend(report.removed.iter().map(|r| r.id.clone()));
        all.sort();
        let mut expected: Vec<String> = (0..texts.len()).map(|i| format!("j{i}")).collect();
        expected.sort();
        assert_eq!(all, expected);
        for removed in &report.removed {
            assert!(removed.similarity >= report.threshold_used);
            assert!(report.contains_kept(&removed.nearest_kept));
        }
    }

    #[test]
    fn priority_ordering_lets_the_better_duplicate_survive() {
        let candidates = vec![
            candidate("j1", "identical joke"),
            candidate("j2", "identical joke"),
        ];
        let mut priority = BTreeMap::new();
        priority.insert("j1".to_string(), 2.0);
        priority.insert("j2".to_string(), 5.0);
        let report = filter_by_priority(
            &candidates,
            &priority,
            &HashedEmbedder::new(),
            &NoveltyConfig::default(),
        )
        .unwrap();
        assert_eq!(report.kept, vec!["j2"]);
    }
}
