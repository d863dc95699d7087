//! Pipeline orchestration: wiring the stages, the four-configuration
//! experiment harness, and the cross-configuration tournament.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigVariant, PipelineConfig};
use crate::embedding::{Embedder, HashedEmbedder, HttpEmbedder, MemoEmbedder};
use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, Gateway, HttpChatBackend};
use crate::hucot::{generate_joke, HumorStyle, JokeCandidate};
use crate::kg::{self, KgQuery, KnowledgeGraph};
use crate::novelty::{self, FilterReport};
use crate::planner::{self, Strategy, Topic};
use crate::report::{
    ranked_entries, Aggregate, CellFailure, ComparisonBody, ComparisonReport, ComparisonRow,
    RunBody, RunReport, TournamentMatrix,
};
use crate::revision::{self, compute_performance, IterationRecord};
use crate::scoring::{self, fuse, normalize, ScoredJoke, SignalScores};
use crate::stats::bootstrap_mean_ci;
use crate::templates::TemplateStore;

/// Bounded fan-out helper. With a bound of 1 everything runs inline;
/// above that, closures run on a dedicated rayon pool. Results always
/// come back in input order.
pub struct Parallelism {
    pool: Option<rayon::ThreadPool>,
}

impl Parallelism {
    pub fn new(max_parallel: usize) -> Result<Self> {
        if max_parallel <= 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(max_parallel)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Parallelism { pool: Some(pool) })
    }

    pub fn sequential() -> Self {
        Parallelism { pool: None }
    }

    pub fn run<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Send + Sync,
    {
        match &self.pool {
            Some(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
            None => items.into_iter().map(f).collect(),
        }
    }
}

/// Everything a run needs, constructed once per run.
pub struct Services {
    pub config: PipelineConfig,
    pub gateway: Gateway,
    pub embedder: Arc<dyn Embedder>,
    pub templates: TemplateStore,
    pub parallel: Parallelism,
}

impl Services {
    /// Build services over explicit backends. The embedder gains a
    /// per-run memo; the gateway inherits the pipeline-level cassette
    /// path.
    pub fn build(
        config: PipelineConfig,
        backend: Arc<dyn ChatBackend>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self> {
        config.validate()?;
        let mut gateway_config = config.gateway.clone();
        gateway_config.cassette_path = config.cassette_path.clone();
        let gateway = Gateway::new(backend, gateway_config, Some(config.seed))?;
        let templates = TemplateStore::from_config(&config.template_dir)?;
        let parallel = Parallelism::new(config.max_parallel_calls)?;
        Ok(Services {
            gateway,
            embedder: Arc::new(MemoEmbedder::new(embedder)),
            templates,
            parallel,
            config,
        })
    }

    /// Build from config alone, constructing the HTTP chat backend and
    /// the configured embedder.
    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let backend: Arc<dyn ChatBackend> = Arc::new(HttpChatBackend::new(
            config.gateway.base_url.clone(),
            config.gateway.api_key_env.clone(),
        )?);
        let embedder: Arc<dyn Embedder> = match config.embedding.kind.as_str() {
            "external-service" => Arc::new(HttpEmbedder::new(
                config.embedding.base_url.clone(),
                config.embedding.model.clone(),
                config.embedding.api_key_env.clone(),
            )?),
            _ => Arc::new(HashedEmbedder::new()),
        };
        Self::build(config, backend, embedder)
    }
}

/// Output of one generate → filter → score pass.
pub struct PassResult {
    pub generated: Vec<JokeCandidate>,
    pub filter_report: FilterReport,
    pub scored: Vec<ScoredJoke>,
}

/// Generate jokes for every strategy, filter near-duplicates, and score
/// the survivors with all four signals.
pub fn generation_pass(
    strategies: &[Strategy],
    topic: &Topic,
    style: HumorStyle,
    iteration: u32,
    services: &Services,
) -> Result<PassResult> {
    // Generation order is strategy order × fan-out; ids encode it.
    let jobs: Vec<(usize, &Strategy, usize)> = strategies
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..services.config.jokes_per_strategy).map(move |k| (si, s, k)))
        .collect();
    let generated: Vec<JokeCandidate> = services
        .parallel
        .run(jobs, |(_, strategy, k)| {
            generate_joke(
                strategy,
                topic,
                style,
                format!("i{iteration}-{}-j{}", strategy.id, k + 1),
                iteration,
                &services.gateway,
                &services.templates,
            )
        })
        .into_iter()
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("generate"))?;

    let filter_report = novelty::filter(&generated, services.embedder.as_ref(), &services.config.novelty)
        .map_err(|e| e.in_stage("novelty-filter"))?;
    let survivors: Vec<JokeCandidate> = filter_report
        .kept
        .iter()
        .map(|id| generated.iter().find(|c| c.id == *id).cloned().expect("kept id from input"))
        .collect();

    let scored = score_candidates(&survivors, topic, services).map_err(|e| e.in_stage("score"))?;
    Ok(PassResult {
        generated,
        filter_report,
        scored,
    })
}

fn score_candidates(
    survivors: &[JokeCandidate],
    topic: &Topic,
    services: &Services,
) -> Result<Vec<ScoredJoke>> {
    if survivors.is_empty() {
        return Ok(Vec::new());
    }
    let win_rates = scoring::run_pairwise(
        survivors,
        topic,
        &services.gateway,
        &services.templates,
        &services.parallel,
    )?;
    let jobs: Vec<&JokeCandidate> = survivors.iter().collect();
    services
        .parallel
        .run(jobs, |candidate| -> Result<ScoredJoke> {
            let direct_vote =
                scoring::score_direct(candidate, topic, &services.gateway, &services.templates)?;
            let persona_scores =
                scoring::score_personas(candidate, topic, &services.gateway, &services.templates)?;
            let topic_relevance =
                scoring::score_relevance(candidate, topic, services.embedder.as_ref())?;
            let raw = SignalScores {
                direct_vote,
                persona_scores,
                win_rate: win_rates[&candidate.id],
                topic_relevance,
            };
            raw.validate()?;
            let score = fuse(&normalize(&raw), &services.config.weights)?;
            Ok(ScoredJoke {
                candidate: candidate.clone(),
                raw,
                score,
            })
        })
        .into_iter()
        .collect()
}

/// Total order over scored jokes: hybrid score descending, then win rate
/// descending, then joke id ascending.
pub fn rank(mut scored: Vec<ScoredJoke>) -> Vec<ScoredJoke> {
    scored.sort_by(|a, b| {
        b.score
            .value
            .total_cmp(&a.score.value)
            .then_with(|| b.raw.win_rate.total_cmp(&a.raw.win_rate))
            .then_with(|| a.candidate.id.cmp(&b.candidate.id))
    });
    scored
}

fn run_id_for(topic: &Topic, style: HumorStyle, config: &PipelineConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(topic.id.as_bytes());
    hasher.update(b"\x00");
    hasher.update(style.as_str().as_bytes());
    hasher.update(b"\x00");
    hasher.update(serde_json::to_vec(config)?);
    Ok(format!("run-{}", &hex::encode(hasher.finalize())[..12]))
}

struct StageOutput {
    all_strategies: Vec<Strategy>,
    scored: Vec<ScoredJoke>,
    filter_reports: Vec<FilterReport>,
    iterations: Vec<IterationRecord>,
    warnings: Vec<String>,
    kg_after_run: Option<(KnowledgeGraph, PathBuf)>,
}

fn execute_stages(topic: &Topic, style: HumorStyle, services: &Services) -> Result<StageOutput> {
    let config = &services.config;

    // Plan: KG enhancement happens iff the variant asks for it.
    let mut kg_state: Option<(KnowledgeGraph, PathBuf)> = None;
    let mut kg_strategies: Vec<Strategy> = Vec::new();
    if config.use_kg {
        let path = PathBuf::from(&config.kg_path);
        let graph = KnowledgeGraph::load_or_empty(&path).map_err(|e| e.in_stage("kg-load"))?;
        let query = KgQuery {
            style,
            topic_embedding: services.embedder.embed(&topic.text).map_err(|e| e.in_stage("kg-query"))?,
            min_mean_performance: 7.0,
            limit: config.plan.kg_limit,
        };
        let hits = kg::retrieve_high_performers(&graph, &query).map_err(|e| e.in_stage("kg-query"))?;
        for (index, node) in hits.iter().enumerate() {
            let adapted = kg::adapt(
                node,
                topic,
                format!("kga-{:02}", index + 1),
                &services.gateway,
                &services.templates,
            )
            .map_err(|e| e.in_stage("kg-adapt"))?;
            kg_strategies.push(adapted);
        }
        kg_state = Some((graph, path));
    }

    let pool = planner::plan_pool(
        topic,
        &config.plan,
        kg_strategies,
        &services.gateway,
        services.embedder.as_ref(),
        &services.templates,
        &services.parallel,
    )
    .map_err(|e| e.in_stage("plan"))?;

    let (all_strategies, scored, filter_reports, iterations, warnings) = if config.use_revision {
        let outcome = revision::run_loop(pool, topic, style, services)?;
        (
            outcome.all_strategies,
            outcome.scored_jokes,
            outcome.filter_reports,
            outcome.iterations,
            outcome.warnings,
        )
    } else {
        let pass = generation_pass(&pool, topic, style, 0, services)?;
        (pool, pass.scored, vec![pass.filter_report], Vec::new(), Vec::new())
    };

    Ok(StageOutput {
        all_strategies,
        scored,
        filter_reports,
        iterations,
        warnings,
        kg_after_run: kg_state,
    })
}

/// Run the whole pipeline for one topic. Stage failures do not panic the
/// caller: they produce a report flagged `incomplete` carrying the error.
pub fn run_pipeline(topic: &Topic, style: HumorStyle, services: &Services) -> Result<RunReport> {
    if topic.style != style {
        return Err(Error::Config(format!(
            "topic style {} does not match requested style {style}",
            topic.style
        )));
    }
    services.config.validate()?;
    let run_id = run_id_for(topic, style, &services.config)?;

    let mut body = RunBody {
        run_id: run_id.clone(),
        status: "complete".to_string(),
        error: None,
        topic: topic.clone(),
        style,
        config: services.config.clone(),
        ranked: Vec::new(),
        strategies: Vec::new(),
        filter_reports: Vec::new(),
        iterations: Vec::new(),
        warnings: Vec::new(),
        aggregate: Aggregate::default(),
    };

    match execute_stages(topic, style, services) {
        Ok(output) => {
            let ranked_jokes = rank(output.scored);
            // Persist run results into the KG only on KG-enabled runs.
            if let Some((mut graph, path)) = output.kg_after_run {
                let perfs = compute_performance(
                    &ranked_jokes,
                    &output.all_strategies,
                    services.config.revision.performance_source,
                )
                .map_err(|e| e.in_stage("kg-upsert"))?;
                let timestamp = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                kg::upsert_run_results(
                    &mut graph,
                    &output.all_strategies,
                    &perfs,
                    topic,
                    &run_id,
                    timestamp,
                    services.embedder.as_ref(),
                )
                .map_err(|e| e.in_stage("kg-upsert"))?;
                graph.save(&path).map_err(|e| e.in_stage("kg-save"))?;
            }

            body.aggregate = Aggregate {
                mean_hybrid_score: (!ranked_jokes.is_empty()).then(|| {
                    ranked_jokes.iter().map(|j| j.score.value).sum::<f64>()
                        / ranked_jokes.len() as f64
                }),
                joke_count: ranked_jokes.len(),
            };
            body.ranked = ranked_entries(&ranked_jokes, &output.all_strategies);
            body.strategies = output.all_strategies;
            body.filter_reports = output.filter_reports;
            body.iterations = output.iterations;
            body.warnings = output.warnings;
        }
        Err(e) => {
            body.status = "incomplete".to_string();
            body.error = Some(e.to_string());
        }
    }

    Ok(RunReport::new(body))
}

/// A topic row in an experiment spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicSpec {
    pub text: String,
}

/// The experiment grid: topics × styles × configurations × replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub topics: Vec<TopicSpec>,
    pub styles: Vec<HumorStyle>,
    pub configs: Vec<ConfigVariant>,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    #[serde(default = "default_bootstrap_samples")]
    pub bootstrap_samples: usize,
    /// Jokes per report entered into the optional global tournament.
    #[serde(default)]
    pub tournament_top_k: Option<usize>,
    pub base: PipelineConfig,
}

fn default_replicates() -> u32 {
    1
}

fn default_bootstrap_samples() -> usize {
    2000
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: ExperimentSpec = toml::from_str(&raw)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() || self.styles.is_empty() || self.configs.is_empty() {
            return Err(Error::Config(
                "experiment needs at least one topic, style, and config".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        self.base.validate()
    }
}

/// Execute every experiment cell, pool joke scores per (config, style),
/// and attach percentile-bootstrap confidence intervals. Failed cells are
/// recorded and excluded from the aggregates.
pub fn run_experiment(
    spec: &ExperimentSpec,
    backend: Arc<dyn ChatBackend>,
    embedder: Arc<dyn Embedder>,
) -> Result<ComparisonReport> {
    spec.validate()?;
    let mut cell_scores: BTreeMap<(ConfigVariant, HumorStyle), Vec<f64>> = BTreeMap::new();
    let mut config_scores: BTreeMap<ConfigVariant, Vec<f64>> = BTreeMap::new();
    let mut failed: Vec<CellFailure> = Vec::new();
    let mut reports: Vec<RunReport> = Vec::new();

    for &variant in &spec.configs {
        for &style in &spec.styles {
            cell_scores.entry((variant, style)).or_default();
            for topic_spec in &spec.topics {
                for replicate in 0..spec.replicates {
                    let mut config = spec.base.with_variant(variant);
                    config.seed = spec.base.seed + i64::from(replicate);
                    let outcome = Topic::from_text(&topic_spec.text, style)
                        .and_then(|topic| {
                            let services =
                                Services::build(config.clone(), backend.clone(), embedder.clone())?;
                            run_pipeline(&topic, style, &services)
                        });
                    match outcome {
                        Ok(report) if report.body.status == "complete" => {
                            let values: Vec<f64> =
                                report.body.ranked.iter().map(|j| j.hybrid_score).collect();
                            cell_scores.get_mut(&(variant, style)).unwrap().extend(&values);
                            config_scores.entry(variant).or_default().extend(&values);
                            reports.push(report);
                        }
                        Ok(report) => failed.push(CellFailure {
                            config: variant.to_string(),
                            style: style.to_string(),
                            topic_id: report.body.topic.id.clone(),
                            replicate,
                            error: report.body.error.unwrap_or_else(|| "incomplete".into()),
                        }),
                        Err(e) => failed.push(CellFailure {
                            config: variant.to_string(),
                            style: style.to_string(),
                            topic_id: topic_spec.text.clone(),
                            replicate,
                            error: e.to_string(),
                        }),
                    }
                }
            }
        }
    }

    let seed_base = spec.base.seed.unsigned_abs();
    let rows: Vec<ComparisonRow> = cell_scores
        .iter()
        .enumerate()
        .map(|(index, ((variant, style), values))| ComparisonRow {
            config: variant.to_string(),
            style: style.to_string(),
            stats: bootstrap_mean_ci(values, spec.bootstrap_samples, seed_base + index as u64),
        })
        .collect();
    let config_totals: Vec<ComparisonRow> = config_scores
        .iter()
        .enumerate()
        .map(|(index, (variant, values))| ComparisonRow {
            config: variant.to_string(),
            style: "all".to_string(),
            stats: bootstrap_mean_ci(
                values,
                spec.bootstrap_samples,
                seed_base + 10_000 + index as u64,
            ),
        })
        .collect();

    let tournament = match spec.tournament_top_k {
        Some(top_k) if reports.len() >= 2 => {
            let base_services =
                Services::build(spec.base.clone(), backend.clone(), embedder.clone())?;
            Some(global_tournament(&reports, top_k, &base_services)?)
        }
        _ => None,
    };

    Ok(ComparisonReport::new(ComparisonBody {
        rows,
        config_totals,
        failed_cells: failed,
        bootstrap_samples: spec.bootstrap_samples,
        tournament,
    }))
}

/// Round-robin the top `top_k` jokes of every report against each other
/// and aggregate wins per configuration.
pub fn global_tournament(
    reports: &[RunReport],
    top_k: usize,
    services: &Services,
) -> Result<TournamentMatrix> {
    if reports.len() < 2 {
        return Err(Error::Config("tournament needs at least 2 reports".into()));
    }
    if top_k == 0 {
        return Err(Error::Config("top_k must be >= 1".into()));
    }

    let mut configs: Vec<String> = Vec::new();
    let mut config_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut items: Vec<(String, String)> = Vec::new();
    let mut item_config: BTreeMap<String, usize> = BTreeMap::new();

    for (report_index, report) in reports.iter().enumerate() {
        let config_name = report.body.config.variant().to_string();
        let index = *config_index.entry(config_name.clone()).or_insert_with(|| {
            configs.push(config_name.clone());
            configs.len() - 1
        });
        for joke in report.body.ranked.iter().take(top_k) {
            let key = format!("{config_name}#r{report_index}:{}", joke.id);
            item_config.insert(key.clone(), index);
            items.push((key, joke.text.clone()));
        }
    }
    if items.len() < 2 {
        return Err(Error::TournamentTooSmall(items.len()));
    }

    let topic_text = common_topic(reports);
    let outcome = scoring::pairwise_tournament(
        &items,
        &topic_text,
        &services.gateway,
        &services.templates,
        &services.parallel,
    )?;

    let n = configs.len();
    let mut wins = vec![vec![0u32; n]; n];
    let mut comparisons = vec![vec![0u32; n]; n];
    for (first, second, winner) in &outcome.comparisons {
        let i = item_config[first];
        let j = item_config[second];
        comparisons[i][j] += 1;
        if i != j {
            comparisons[j][i] += 1;
        }
        let w = item_config[winner];
        if i == j {
            wins[i][i] += 1;
        } else {
            let loser = if w == i { j } else { i };
            wins[w][loser] += 1;
        }
    }

    Ok(TournamentMatrix {
        configs,
        top_k,
        wins,
        comparisons,
        joke_win_rates: outcome.win_rates,
        skipped: outcome.skipped.len(),
    })
}

fn common_topic(reports: &[RunReport]) -> String {
    let first = &reports[0].body.topic.text;
    if reports.iter().all(|r| r.body.topic.text == *first) {
        first.clone()
    } else {
        "the joke's own topic".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScoreWeights;
    use crate::hucot::HucotTrace;
    use crate::scoring::{HybridScore, NormalizedSignals, Persona};

    fn scored(id: &str, value: f64, win_rate: f64) -> ScoredJoke {
        let mut persona_scores = BTreeMap::new();
        for p in Persona::ALL {
            persona_scores.insert(p, 5.0);
        }
        ScoredJoke {
            candidate: JokeCandidate {
                id: id.into(),
                text: format!("joke {id}"),
                trace: HucotTrace {
                    steps: vec![("1".into(), "s".into())],
                },
                strategy_id: "s".into(),
                topic_id: "t".into(),
                iteration: 0,
                style: HumorStyle::Generic,
            },
            raw: SignalScores {
                direct_vote: 3,
                persona_scores,
                win_rate,
                topic_relevance: 0.3,
            },
            score: HybridScore {
                value,
                weights_used: ScoreWeights::default(),
                signals: NormalizedSignals {
                    s_direct: value,
                    s_persona: value,
                    s_pairwise: value,
                    s_relevance: value,
                },
            },
        }
    }

    #[test]
    fn rank_applies_the_tie_break_chain() {
        let jokes = vec![
            scored("j-d", 5.0, 0.1),
            scored("j-b", 6.4, 0.4),
            scored("j-a", 6.4, 0.6),
            scored("j-c", 7.1, 0.2),
        ];
        let ranked = rank(jokes);
        let ids: Vec<&str> = ranked.iter().map(|j| j.candidate.id.as_str()).collect();
        assert_eq!(ids, vec!["j-c", "j-a", "j-b", "j-d"]);
    }

    #[test]
    fn rank_orders_fully_tied_jokes_by_id() {
        let jokes = vec![
            scored("j-2", 6.0, 0.5),
            scored("j-1", 6.0, 0.5),
            scored("j-3", 6.0, 0.5),
        ];
        let ids: Vec<String> = rank(jokes)
            .iter()
            .map(|j| j.candidate.id.clone())
            .collect();
        assert_eq!(ids, vec!["j-1", "j-2", "j-3"]);
    }

    #[test]
    fn rank_is_total_over_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(0..12);
            let jokes: Vec<ScoredJoke> = (0..n)
                .map(|i| {
                    scored(
                        &format!("j-{i}"),
                        (rng.gen::<f64>() * 4.0).round(),
                        (rng.gen::<f64>() * 2.0).round() / 2.0,
                    )
                })
                .collect();
            let ranked = rank(jokes);
            for pair in ranked.windows(2) {
                let a = &pair[0];
                let b = &pair[1];
                let key_a = (a.score.value, a.raw.win_rate);
                let key_b = (b.score.value, b.raw.win_rate);
                if key_a == key_b {
                    assert!(a.candidate.id < b.candidate.id);
                } else {
                    assert!(
                        a.score.value > b.score.value
                            || (a.score.value == b.score.value && a.raw.win_rate > b.raw.win_rate)
                    );
                }
            }
        }
    }

    #[test]
    fn run_id_is_deterministic_and_config_sensitive() {
        let topic = Topic::from_text("trains", HumorStyle::Generic).unwrap();
        let config = PipelineConfig::default();
        let a = run_id_for(&topic, HumorStyle::Generic, &config).unwrap();
        let b = run_id_for(&topic, HumorStyle::Generic, &config).unwrap();
        assert_eq!(a, b);
        let mut other = config.clone();
        other.seed = 99;
        let c = run_id_for(&topic, HumorStyle::Generic, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn parallelism_preserves_input_order() {
        let parallel = Parallelism::new(4).unwrap();
        let items: Vec<u32> = (0..100).collect();
        let out = parallel.run(items, |x| x * 2);
        assert_eq!(out, (0..100).map(|x| x * 2).collect::<Vec<u32>>());
    }
}
