//! Judge-guided strategy revision.
//!
//! Each iteration generates jokes from the current strategies, filters
//! them for novelty, scores the survivors, computes per-strategy
//! performance, partitions strategies into low/mid/high bands, solicits
//! judge suggestions for the low band, and rewrites the strategies whose
//! suggested revision projects enough gain. The next iteration keeps the
//! revised low band plus the high band; the mid band is dropped unless
//! `retain_midband` is set.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::config::{PerformanceSource, RevisionConfig};
use crate::error::{Error, Result};
use crate::gateway::{FieldSpec, ModelRole};
use crate::hucot::HumorStyle;
use crate::novelty::FilterReport;
use crate::pipeline::Services;
use crate::planner::{complete_title_description, Strategy, StrategyOrigin, Topic};
use crate::scoring::ScoredJoke;

/// Mean score of a strategy's surviving jokes. `p_s` is defined iff the
/// strategy has at least one surviving joke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPerformance {
    pub strategy_id: String,
    pub p_s: Option<f64>,
    pub n_jokes: usize,
}

/// A judge suggestion for one underperforming strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSuggestion {
    pub strategy_id: String,
    pub suggestion_text: String,
    pub projected_gain: f64,
}

/// The three performance bands of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Bands {
    pub low: Vec<String>,
    pub mid: Vec<String>,
    pub high: Vec<String>,
}

/// Audit record of one revision iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub bands: Bands,
    /// (original id, revised id, projected gain) per applied revision.
    pub revisions_applied: Vec<(String, String, f64)>,
    /// (joke id, hybrid score value) for every joke scored this iteration.
    pub jokes_scored: Vec<(String, f64)>,
    /// Suggestion or revision failures, recorded rather than fatal.
    pub skipped: Vec<String>,
}

/// Everything a finished loop hands back to the orchestrator.
#[derive(Debug, Clone, Default)]
pub struct LoopOutcome {
    pub final_strategies: Vec<Strategy>,
    /// Every strategy the loop ever held, revisions included.
    pub all_strategies: Vec<Strategy>,
    pub iterations: Vec<IterationRecord>,
    pub scored_jokes: Vec<ScoredJoke>,
    pub filter_reports: Vec<FilterReport>,
    pub warnings: Vec<String>,
}

/// One performance record per pool strategy, in pool order. Candidates
/// whose strategy is missing from the pool are an error.
pub fn compute_performance(
    scored: &[ScoredJoke],
    pool: &[Strategy],
    source: PerformanceSource,
) -> Result<Vec<StrategyPerformance>> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for joke in scored {
        if !pool.iter().any(|s| s.id == joke.candidate.strategy_id) {
            return Err(Error::OrphanCandidate {
                joke: joke.candidate.id.clone(),
                strategy: joke.candidate.strategy_id.clone(),
            });
        }
        let value = match source {
            PerformanceSource::Hybrid => joke.score.value,
            PerformanceSource::PersonaOnly => joke.score.signals.s_persona,
        };
        let entry = sums.entry(joke.candidate.strategy_id.as_str()).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    Ok(pool
        .iter()
        .map(|strategy| match sums.get(strategy.id.as_str()) {
            Some((total, count)) => StrategyPerformance {
                strategy_id: strategy.id.clone(),
                p_s: Some(total / *count as f64),
                n_jokes: *count,
            },
            None => StrategyPerformance {
                strategy_id: strategy.id.clone(),
                p_s: None,
                n_jokes: 0,
            },
        })
        .collect())
}

/// Partition by the band thresholds: `p_s < low` → low, `p_s >= high` →
/// high, otherwise mid. An undefined `p_s` (no surviving jokes) lands in
/// the low band: no evidence of quality.
pub fn partition(perfs: &[StrategyPerformance], config: &RevisionConfig) -> Bands {
    let mut bands = Bands::default();
    for perf in perfs {
        match perf.p_s {
            None => bands.low.push(perf.strategy_id.clone()),
            Some(p) if p < config.low_threshold => bands.low.push(perf.strategy_id.clone()),
            Some(p) if p >= config.high_threshold => bands.high.push(perf.strategy_id.clone()),
            Some(_) => bands.mid.push(perf.strategy_id.clone()),
        }
    }
    bands
}

/// Ask the judge for at most one improvement suggestion per low-band
/// strategy. A parse failure skips that strategy (it proceeds unrevised)
/// and is reported in the second return value.
pub fn solicit_suggestions(
    s_low: &[&Strategy],
    perfs: &[StrategyPerformance],
    topic: &Topic,
    services: &Services,
) -> (Vec<ImprovementSuggestion>, Vec<String>) {
    let mut suggestions = Vec::new();
    let mut skipped = Vec::new();
    for strategy in s_low {
        let p_s = perfs
            .iter()
            .find(|p| p.strategy_id == strategy.id)
            .and_then(|p| p.p_s);
        let performance = match p_s {
            Some(p) => format!("{p:.2}"),
            None => "undefined (no surviving jokes)".to_string(),
        };
        let result = services
            .templates
            .render(
                "suggest",
                &[
                    ("topic", topic.text.as_str()),
                    ("performance", performance.as_str()),
                    ("strategy_title", strategy.title.as_str()),
                    ("strategy_description", strategy.description.as_str()),
                ],
            )
            .and_then(|prompt| {
                let request = services.gateway.request(
                    ModelRole::Judge,
                    "You are a comedy judge coaching a strategist. Reply with exactly \
                     the JSON object requested and nothing else.",
                    prompt,
                );
                services.gateway.complete_validated(
                    &request,
                    &[FieldSpec::string("suggestion"), FieldSpec::number("projected_gain")],
                    "revise.suggest",
                    |map| {
                        let text = map["suggestion"].as_str().unwrap_or_default().trim().to_string();
                        if text.is_empty() {
                            return Err("suggestion must be non-empty".into());
                        }
                        let gain = map["projected_gain"].as_f64().ok_or("projected_gain must be a number")?;
                        Ok((text, gain))
                    },
                )
            });
        match result {
            Ok((suggestion_text, projected_gain)) => suggestions.push(ImprovementSuggestion {
                strategy_id: strategy.id.clone(),
                suggestion_text,
                projected_gain,
            }),
            Err(e) => skipped.push(format!("suggestion for {}: {e}", strategy.id)),
        }
    }
    (suggestions, skipped)
}

/// Rewrite each low-band strategy whose suggestion projects at least the
/// improvement threshold (closed bound). Strategies without a qualifying
/// suggestion, and revision-generation failures, pass through unchanged;
/// the output always has one entry per input strategy.
pub fn revise_strategies(
    s_low: &[&Strategy],
    suggestions: &[ImprovementSuggestion],
    round: u32,
    topic: &Topic,
    config: &RevisionConfig,
    services: &Services,
) -> (Vec<Strategy>, Vec<(String, String, f64)>, Vec<String>) {
    let mut out = Vec::with_capacity(s_low.len());
    let mut applied = Vec::new();
    let mut skipped = Vec::new();
    for strategy in s_low {
        let suggestion = suggestions
            .iter()
            .find(|s| s.strategy_id == strategy.id)
            .filter(|s| s.projected_gain >= config.improvement_threshold);
        let Some(suggestion) = suggestion else {
            out.push((*strategy).clone());
            continue;
        };
        let result = services
            .templates
            .render(
                "revise",
                &[
                    ("topic", topic.text.as_str()),
                    ("style", topic.style.as_str()),
                    ("strategy_title", strategy.title.as_str()),
                    ("strategy_description", strategy.description.as_str()),
                    ("suggestion", suggestion.suggestion_text.as_str()),
                ],
            )
            .and_then(|prompt| {
                let request = services.gateway.request(
                    ModelRole::Strategy,
                    "You revise humor strategies. Reply with exactly the JSON object \
                     requested and nothing else.",
                    prompt,
                );
                complete_title_description(&services.gateway, &request, "revise.apply")
            });
        match result {
            Ok((title, description)) => {
                let revised = Strategy {
                    id: format!("{}.r{round}", strategy.id),
                    title,
                    description,
                    origin: StrategyOrigin::Revised {
                        original: strategy.id.clone(),
                        round,
                    },
                    topic_id: strategy.topic_id.clone(),
                    style: strategy.style,
                };
                applied.push((strategy.id.clone(), revised.id.clone(), suggestion.projected_gain));
                out.push(revised);
            }
            Err(e) => {
                skipped.push(format!("revision of {}: {e}", strategy.id));
                out.push((*strategy).clone());
            }
        }
    }
    (out, applied, skipped)
}

/// Run the full revision loop. With `max_iterations = 0` the initial
/// strategies come back untouched and no jokes are generated.
pub fn run_loop(
    initial: Vec<Strategy>,
    topic: &Topic,
    style: HumorStyle,
    services: &Services,
) -> Result<LoopOutcome> {
    if initial.is_empty() {
        return Err(Error::Config("revision loop needs at least one strategy".into()));
    }
    let config = services.config.revision;
    let mut outcome = LoopOutcome {
        all_strategies: initial.clone(),
        final_strategies: initial,
        ..LoopOutcome::default()
    };

    for iteration in 1..=config.max_iterations {
        if outcome.final_strategies.is_empty() {
            outcome
                .warnings
                .push(format!("iteration {iteration}: strategy set is empty, halting early"));
            break;
        }
        let pass = crate::pipeline::generation_pass(
            &outcome.final_strategies,
            topic,
            style,
            iteration,
            services,
        )?;
        let perfs = compute_performance(
            &pass.scored,
            &outcome.final_strategies,
            config.performance_source,
        )?;
        let bands = partition(&perfs, &config);

        let by_id: BTreeMap<&str, &Strategy> = outcome
            .final_strategies
            .iter()
            .map(|s| (s.id.as_str(), s))
            .collect();
        let s_low: Vec<&Strategy> = bands.low.iter().map(|id| by_id[id.as_str()]).collect();
        let (suggestions, mut skipped) = solicit_suggestions(&s_low, &perfs, topic, services);
        let (revised_low, applied, skipped_revisions) =
            revise_strategies(&s_low, &suggestions, iteration, topic, &config, services);
        skipped.extend(skipped_revisions);

        let mut next: Vec<Strategy> = revised_low;
        if config.retain_midband {
            next.extend(bands.mid.iter().map(|id| by_id[id.as_str()].clone()));
        }
        next.extend(bands.high.iter().map(|id| by_id[id.as_str()].clone()));
        for strategy in &next {
            if !outcome.all_strategies.iter().any(|s| s.id == strategy.id) {
                outcome.all_strategies.push(strategy.clone());
            }
        }

        outcome.iterations.push(IterationRecord {
            iteration,
            bands,
            revisions_applied: applied,
            jokes_scored: pass
                .scored
                .iter()
                .map(|j| (j.candidate.id.clone(), j.score.value))
                .collect(),
            skipped,
        });
        outcome.filter_reports.push(pass.filter_report);
        outcome.scored_jokes.extend(pass.scored);
        outcome.final_strategies = next;
    }
    Ok(outcome)
}
