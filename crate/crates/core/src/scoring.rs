//! The four evaluation signals and their weighted fusion.
//!
//! Signals: a direct 1-5 vote, three persona scores on a 0-10 scale, a
//! round-robin pairwise win rate, and embedding relevance to the topic.
//! All four are normalized onto [0, 10] and fused as `Σ wᵢ·sᵢ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ScoreWeights;
use crate::embedding::{cosine, Embedder};
use crate::error::{Error, Result};
use crate::gateway::{FieldSpec, Gateway, ModelRole};
use crate::hucot::JokeCandidate;
use crate::planner::Topic;
use crate::templates::TemplateStore;

const SYSTEM_JUDGE: &str = "You are a meticulous comedy judge. You evaluate \
jokes honestly and always reply with exactly the JSON object requested and \
nothing else.";

/// The three fixed judge personas.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Persona {
    EnthusiasticFan,
    CriticalCritic,
    AcademicAnalyst,
}

impl Persona {
    pub const ALL: [Persona; 3] = [
        Persona::EnthusiasticFan,
        Persona::CriticalCritic,
        Persona::AcademicAnalyst,
    ];

    pub fn display_name(&self) -> &'static str {
        match self {
            Persona::EnthusiasticFan => "Enthusiastic Fan",
            Persona::CriticalCritic => "Critical Critic",
            Persona::AcademicAnalyst => "Academic Analyst",
        }
    }

    pub fn template_name(&self) -> &'static str {
        match self {
            Persona::EnthusiasticFan => "persona_enthusiastic_fan",
            Persona::CriticalCritic => "persona_critical_critic",
            Persona::AcademicAnalyst => "persona_academic_analyst",
        }
    }
}

/// The raw signals for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalScores {
    /// Direct judge vote in [1, 5].
    pub direct_vote: i64,
    /// One score in [0, 10] per persona; always exactly three entries.
    pub persona_scores: BTreeMap<Persona, f64>,
    /// Round-robin win rate in [0, 1].
    pub win_rate: f64,
    /// Cosine similarity to the topic in [-1, 1].
    pub topic_relevance: f64,
}

impl SignalScores {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.direct_vote) {
            return Err(Error::SignalRange(format!(
                "direct_vote {} outside [1, 5]",
                self.direct_vote
            )));
        }
        if self.persona_scores.len() != 3 {
            return Err(Error::SignalRange(format!(
                "expected 3 persona scores, got {}",
                self.persona_scores.len()
            )));
        }
        for (persona, score) in &self.persona_scores {
            if !(0.0..=10.0).contains(score) {
                return Err(Error::SignalRange(format!(
                    "persona {} score {score} outside [0, 10]",
                    persona.display_name()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.win_rate) {
            return Err(Error::SignalRange(format!(
                "win_rate {} outside [0, 1]",
                self.win_rate
            )));
        }
        if !(-1.0..=1.0).contains(&self.topic_relevance) {
            return Err(Error::SignalRange(format!(
                "topic_relevance {} outside [-1, 1]",
                self.topic_relevance
            )));
        }
        Ok(())
    }

    pub fn persona_mean(&self) -> f64 {
        self.persona_scores.values().sum::<f64>() / self.persona_scores.len() as f64
    }
}

/// The four signals on the common [0, 10] scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSignals {
    pub s_direct: f64,
    pub s_persona: f64,
    pub s_pairwise: f64,
    pub s_relevance: f64,
}

impl NormalizedSignals {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s_direct, self.s_persona, self.s_pairwise, self.s_relevance]
    }
}

/// The fused score with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridScore {
    pub value: f64,
    pub weights_used: ScoreWeights,
    pub signals: NormalizedSignals,
}

/// A candidate with its full evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredJoke {
    pub candidate: JokeCandidate,
    pub raw: SignalScores,
    pub score: HybridScore,
}

/// Map raw signals onto the common [0, 10] scale:
/// direct `(v-1)/4·10`, personas by unweighted mean, win rate `×10`,
/// relevance clamped at 0 then `×10`.
pub fn normalize(raw: &SignalScores) -> NormalizedSignals {
    NormalizedSignals {
        s_direct: (raw.direct_vote - 1) as f64 / 4.0 * 10.0,
        s_persona: raw.persona_mean(),
        s_pairwise: raw.win_rate * 10.0,
        s_relevance: raw.topic_relevance.clamp(0.0, 1.0) * 10.0,
    }
}

/// Fuse normalized signals under weights that sum to 1.
pub fn fuse(signals: &NormalizedSignals, weights: &ScoreWeights) -> Result<HybridScore> {
    weights.validate()?;
    let value = weights.w_direct * signals.s_direct
        + weights.w_persona * signals.s_persona
        + weights.w_pairwise * signals.s_pairwise
        + weights.w_relevance * signals.s_relevance;
    Ok(HybridScore {
        value,
        weights_used: *weights,
        signals: *signals,
    })
}

/// Ask the judge for a direct 1-5 vote. Out-of-range replies are rejected
/// and re-prompted; persistent violations error out.
pub fn score_direct(
    candidate: &JokeCandidate,
    topic: &Topic,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<i64> {
    let prompt = templates.render(
        "judge_direct",
        &[("topic", topic.text.as_str()), ("joke", candidate.text.as_str())],
    )?;
    let request = gateway.request(ModelRole::Judge, SYSTEM_JUDGE, prompt);
    gateway.complete_validated(
        &request,
        &[FieldSpec::integer("score")],
        "score.direct",
        |map| {
            let score = map["score"].as_i64().ok_or("score must be an integer")?;
            if !(1..=5).contains(&score) {
                return Err(format!("score {score} outside the 1-5 scale"));
            }
            Ok(score)
        },
    )
}

/// One judged call per persona, each under that persona's system prompt.
/// The trace is part of the prompt: personas evaluate the joke and its
/// reasoning. Failures carry the persona's identity.
pub fn score_personas(
    candidate: &JokeCandidate,
    topic: &Topic,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<BTreeMap<Persona, f64>> {
    let mut scores = BTreeMap::new();
    for persona in Persona::ALL {
        let system = templates.raw(persona.template_name())?.trim().to_string();
        let user = format!(
            "Topic: {}\n\nReasoning trace:\n{}\n\nJoke:\n{}\n\n\
             Score this joke and its reasoning from 0 to 10.\n\
             Reply with only a JSON object: {{\"score\": N}}",
            topic.text,
            candidate.trace.as_prompt_block(),
            candidate.text
        );
        let request = gateway.request(ModelRole::Judge, system, user);
        let score = gateway
            .complete_validated(
                &request,
                &[FieldSpec::number("score")],
                "score.persona",
                |map| {
                    let score = map["score"].as_f64().ok_or("score must be a number")?;
                    if !(0.0..=10.0).contains(&score) {
                        return Err(format!("score {score} outside the 0-10 scale"));
                    }
                    Ok(score)
                },
            )
            .map_err(|e| match e {
                Error::StructuredParse { attempts, message } => Error::StructuredParse {
                    attempts,
                    message: format!("persona {}: {message}", persona.display_name()),
                },
                other => other,
            })?;
        scores.insert(persona, score);
    }
    Ok(scores)
}

/// The round-robin schedule over `n` items: every unordered pair judged
/// twice, once per presentation order. `n·(n-1)` comparisons total.
pub fn round_robin_schedule(n: usize) -> Vec<(usize, usize)> {
    let mut schedule = Vec::with_capacity(n.saturating_sub(1) * n);
    for i in 0..n {
        for j in (i + 1)..n {
            schedule.push((i, j));
            schedule.push((j, i));
        }
    }
    schedule
}

/// Outcome of a full pairwise tournament over a set of items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseOutcome {
    /// Win rate per item id: wins / comparisons participated (skips
    /// excluded). Items with no completed comparisons sit at 0.5.
    pub win_rates: BTreeMap<String, f64>,
    pub wins: BTreeMap<String, u32>,
    pub participations: BTreeMap<String, u32>,
    /// Completed judged comparisons: (first id, second id, winner id).
    pub comparisons: Vec<(String, String, String)>,
    /// Comparisons the judge failed to decide after retries.
    pub skipped: Vec<(String, String)>,
}

/// Judge a full round robin over `(id, text)` items. Each comparison
/// yields exactly one winner; a comparison whose reply stays unparseable
/// after retries is recorded as skipped and drops out of both items'
/// denominators.
pub fn pairwise_tournament(
    items: &[(String, String)],
    topic_text: &str,
    gateway: &Gateway,
    templates: &TemplateStore,
    parallel: &crate::pipeline::Parallelism,
) -> Result<PairwiseOutcome> {
    let mut outcome = PairwiseOutcome {
        win_rates: BTreeMap::new(),
        wins: BTreeMap::new(),
        participations: BTreeMap::new(),
        comparisons: Vec::new(),
        skipped: Vec::new(),
    };
    for (id, _) in items {
        outcome.wins.insert(id.clone(), 0);
        outcome.participations.insert(id.clone(), 0);
    }
    if items.len() == 1 {
        outcome.win_rates.insert(items[0].0.clone(), 0.5);
        return Ok(outcome);
    }

    let schedule = round_robin_schedule(items.len());
    let results = parallel.run(schedule, |(a, b)| {
        let (id_a, text_a) = &items[a];
        let (id_b, text_b) = &items[b];
        let verdict = judge_pair(text_a, text_b, topic_text, gateway, templates);
        (id_a.clone(), id_b.clone(), verdict)
    });

    for (id_a, id_b, verdict) in results {
        match verdict {
            Ok(first_wins) => {
                let winner = if first_wins { id_a.clone() } else { id_b.clone() };
                *outcome.wins.get_mut(&winner).unwrap() += 1;
                *outcome.participations.get_mut(&id_a).unwrap() += 1;
                *outcome.participations.get_mut(&id_b).unwrap() += 1;
                outcome.comparisons.push((id_a, id_b, winner));
            }
            Err(Error::StructuredParse { .. }) => outcome.skipped.push((id_a, id_b)),
            Err(other) => return Err(other),
        }
    }

    for (id, _) in items {
        let wins = outcome.wins[id] as f64;
        let participated = outcome.participations[id];
        let rate = if participated == 0 {
            0.5
        } else {
            wins / participated as f64
        };
        outcome.win_rates.insert(id.clone(), rate);
    }
    Ok(outcome)
}

fn judge_pair(
    text_a: &str,
    text_b: &str,
    topic_text: &str,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<bool> {
    let prompt = templates.render(
        "judge_pairwise",
        &[("topic", topic_text), ("joke_a", text_a), ("joke_b", text_b)],
    )?;
    let request = gateway.request(ModelRole::Judge, SYSTEM_JUDGE, prompt);
    gateway.complete_validated(
        &request,
        &[FieldSpec::string("winner")],
        "score.pairwise",
        |map| match map["winner"].as_str().map(str::trim) {
            Some(w) if w.eq_ignore_ascii_case("a") => Ok(true),
            Some(w) if w.eq_ignore_ascii_case("b") => Ok(false),
            other => Err(format!("winner must be \"A\" or \"B\", got {other:?}")),
        },
    )
}

/// Round-robin win rates for joke candidates. Singleton input gets the
/// 0.5 convention; empty input an empty map.
pub fn run_pairwise(
    candidates: &[JokeCandidate],
    topic: &Topic,
    gateway: &Gateway,
    templates: &TemplateStore,
    parallel: &crate::pipeline::Parallelism,
) -> Result<BTreeMap<String, f64>> {
    if candidates.is_empty() {
        return Ok(BTreeMap::new());
    }
    let items: Vec<(String, String)> = candidates
        .iter()
        .map(|c| (c.id.clone(), c.text.clone()))
        .collect();
    Ok(pairwise_tournament(&items, &topic.text, gateway, templates, parallel)?.win_rates)
}

/// Cosine similarity between the joke text and the topic text.
pub fn score_relevance(
    candidate: &JokeCandidate,
    topic: &Topic,
    embedder: &dyn Embedder,
) -> Result<f64> {
    let joke = embedder.embed(&candidate.text)?;
    let topic_vector = embedder.embed(&topic.text)?;
    cosine(&joke, &topic_vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GatewayConfig;
    use crate::embedding::HashedEmbedder;
    use crate::gateway::ScriptedBackend;
    use crate::hucot::{HucotTrace, HumorStyle};
    use crate::pipeline::Parallelism;
    use std::sync::Arc;

    fn candidate(id: &str, text: &str) -> JokeCandidate {
        JokeCandidate {
            id: id.into(),
            text: text.into(),
            trace: HucotTrace {
                steps: vec![("1".into(), "a step".into())],
            },
            strategy_id: "s".into(),
            topic_id: "t".into(),
            iteration: 0,
            style: HumorStyle::Generic,
        }
    }

    fn topic() -> Topic {
        Topic {
            id: "t".into(),
            text: "trains running late".into(),
            style: HumorStyle::Generic,
        }
    }

    fn gateway(backend: ScriptedBackend) -> Gateway {
        Gateway::live(Arc::new(backend), GatewayConfig::default(), None)
    }

    fn raw_signals() -> SignalScores {
        let mut persona_scores = BTreeMap::new();
        persona_scores.insert(Persona::EnthusiasticFan, 9.0);
        persona_scores.insert(Persona::CriticalCritic, 4.0);
        persona_scores.insert(Persona::AcademicAnalyst, 6.0);
        SignalScores {
            direct_vote: 3,
            persona_scores,
            win_rate: 0.75,
            topic_relevance: -0.2,
        }
    }

    #[test]
    fn normalization_hits_exact_endpoints() {
        let mut raw = raw_signals();
        raw.direct_vote = 1;
        assert_eq!(normalize(&raw).s_direct, 0.0);
        raw.direct_vote = 3;
        assert_eq!(normalize(&raw).s_direct, 5.0);
        raw.direct_vote = 5;
        assert_eq!(normalize(&raw).s_direct, 10.0);
        assert_eq!(normalize(&raw).s_pairwise, 7.5);
        assert_eq!(normalize(&raw).s_relevance, 0.0); // clamp at 0
    }

    #[test]
    fn persona_mean_feeds_the_persona_signal() {
        let raw = raw_signals();
        let mean = (9.0 + 4.0 + 6.0) / 3.0;
        assert!((normalize(&raw).s_persona - mean).abs() < 1e-12);
        assert!((raw.persona_mean() - 6.333333333333333).abs() < 1e-12);
    }

    #[test]
    fn fuse_equal_weights_is_the_arithmetic_mean() {
        let signals = NormalizedSignals {
            s_direct: 8.0,
            s_persona: 6.0,
            s_pairwise: 4.0,
            s_relevance: 10.0,
        };
        let score = fuse(&signals, &ScoreWeights::default()).unwrap();
        assert!((score.value - 7.0).abs() < 1e-12);
    }

    #[test]
    fn fuse_projects_under_degenerate_weights() {
        let signals = NormalizedSignals {
            s_direct: 9.0,
            s_persona: 1.0,
            s_pairwise: 2.0,
            s_relevance: 3.0,
        };
        let weights = ScoreWeights {
            w_direct: 1.0,
            w_persona: 0.0,
            w_pairwise: 0.0,
            w_relevance: 0.0,
        };
        assert_eq!(fuse(&signals, &weights).unwrap().value, 9.0);
    }

    #[test]
    fn fuse_is_a_fixed_point_on_equal_signals() {
        let signals = NormalizedSignals {
            s_direct: 6.25,
            s_persona: 6.25,
            s_pairwise: 6.25,
            s_relevance: 6.25,
        };
        for weights in [
            ScoreWeights::default(),
            ScoreWeights {
                w_direct: 0.7,
                w_persona: 0.1,
                w_pairwise: 0.1,
                w_relevance: 0.1,
            },
        ] {
            let score = fuse(&signals, &weights).unwrap();
            assert!((score.value - 6.25).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_rejects_bad_weight_sums() {
        let signals = NormalizedSignals {
            s_direct: 1.0,
            s_persona: 1.0,
            s_pairwise: 1.0,
            s_relevance: 1.0,
        };
        let weights = ScoreWeights {
            w_direct: 0.5,
            w_persona: 0.5,
            w_pairwise: 0.5,
            w_relevance: 0.5,
        };
        assert!(matches!(fuse(&signals, &weights), Err(Error::WeightSum(_))));
    }

    #[test]
    fn fusion_is_convex_and_permutation_consistent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let raw: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let total: f64 = raw.iter().sum();
            let w = ScoreWeights {
                w_direct: raw[0] / total,
                w_persona: raw[1] / total,
                w_pairwise: raw[2] / total,
                w_relevance: raw[3] / total,
            };
            let s = NormalizedSignals {
                s_direct: rng.gen::<f64>() * 10.0,
                s_persona: rng.gen::<f64>() * 10.0,
                s_pairwise: rng.gen::<f64>() * 10.0,
                s_relevance: rng.gen::<f64>() * 10.0,
            };
            let value = fuse(&s, &w).unwrap().value;
            let arr = s.as_array();
            let lo = arr.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = arr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(value >= lo - 1e-12 && value <= hi + 1e-12);

            // Swap direct and pairwise together with their weights.
            let w2 = ScoreWeights {
                w_direct: w.w_pairwise,
                w_pairwise: w.w_direct,
                ..w
            };
            let s2 = NormalizedSignals {
                s_direct: s.s_pairwise,
                s_pairwise: s.s_direct,
                ..s
            };
            assert!((fuse(&s2, &w2).unwrap().value - value).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_vote_extracts_and_bounds() {
        let g = gateway(ScriptedBackend::new().on(|_| Some(r#"{"score": 4}"#.into())));
        assert_eq!(
            score_direct(&candidate("j", "x"), &topic(), &g, &TemplateStore::builtin()).unwrap(),
            4
        );
        let g = gateway(ScriptedBackend::new().on(|_| Some(r#"{"score": 1}"#.into())));
        assert_eq!(
            score_direct(&candidate("j", "x"), &topic(), &g, &TemplateStore::builtin()).unwrap(),
            1
        );
    }

    #[test]
    fn out_of_range_votes_exhaust_and_error() {
        let g = gateway(ScriptedBackend::new().on(|_| Some(r#"{"score": 6}"#.into())));
        let err = score_direct(&candidate("j", "x"), &topic(), &g, &TemplateStore::builtin())
            .unwrap_err();
        assert!(matches!(err, Error::StructuredParse { .. }));
    }

    #[test]
    fn personas_return_exactly_three_entries() {
        let g = gateway(ScriptedBackend::new().on(|req| {
            let score = if req.system_prompt.contains("enthusiastic") {
                9
            } else if req.system_prompt.contains("critic") {
                4
            } else {
                6
            };
            Some(format!(r#"{{"score": {score}}}"#))
        }));
        let scores =
            score_personas(&candidate("j", "x"), &topic(), &g, &TemplateStore::builtin()).unwrap();
        assert_eq!(scores.len(), 3);
        assert_eq!(scores[&Persona::EnthusiasticFan], 9.0);
        assert_eq!(scores[&Persona::CriticalCritic], 4.0);
        assert_eq!(scores[&Persona::AcademicAnalyst], 6.0);
    }

    #[test]
    fn persona_failure_names_the_persona() {
        let g = gateway(ScriptedBackend::new().on(|req| {
            if req.system_prompt.contains("academic") {
                Some("not json".into())
            } else {
                Some(r#"{"score": 5}"#.into())
            }
        }));
        let err = score_personas(&candidate("j", "x"), &topic(), &g, &TemplateStore::builtin())
            .unwrap_err();
        assert!(err.to_string().contains("Academic Analyst"), "{err}");
    }

    fn extract_pair<'a>(prompt: &'a str) -> (&'a str, &'a str) {
        let a_start = prompt.find("JOKE A:").unwrap() + 7;
        let b_start = prompt.find("JOKE B:").unwrap();
        let a = prompt[a_start..b_start].trim();
        let b_body = &prompt[b_start + 7..];
        let b_end = b_body.find("Reply").unwrap_or(b_body.len());
        (a, b_body[..b_end].trim())
    }

    /// Judge that always prefers the lexicographically smaller text.
    fn dominance_backend() -> ScriptedBackend {
        ScriptedBackend::new().on(|req| {
            let (a, b) = extract_pair(&req.user_prompt);
            let winner = if a < b { "A" } else { "B" };
            Some(format!(r#"{{"winner": "{winner}"}}"#))
        })
    }

    #[test]
    fn dominant_candidate_sweeps_the_round_robin() {
        let candidates = vec![
            candidate("j1", "aaa joke"),
            candidate("j2", "bbb joke"),
            candidate("j3", "ccc joke"),
        ];
        let g = gateway(dominance_backend());
        let items: Vec<(String, String)> = candidates
            .iter()
            .map(|c| (c.id.clone(), c.text.clone()))
            .collect();
        let outcome = pairwise_tournament(
            &items,
            "topic",
            &g,
            &TemplateStore::builtin(),
            &Parallelism::sequential(),
        )
        .unwrap();
        assert_eq!(outcome.win_rates["j1"], 1.0);
        assert_eq!(outcome.participations["j1"], 4);
        assert_eq!(outcome.comparisons.len(), 6); // 3·(3−1)
        let total_wins: u32 = outcome.wins.values().sum();
        assert_eq!(total_wins, 6);
    }

    #[test]
    fn position_biased_judge_yields_three_quarters() {
        // A beats B in both orders; first-position wins between A and C;
        // B beats C in both orders. A participates 4 times, wins 3.
        let g = gateway(ScriptedBackend::new().on(|req| {
            let (a, b) = extract_pair(&req.user_prompt);
            let has = |x: &str, y: &str| a.contains(x) && b.contains(y);
            let winner = if has("alpha", "beta") || has("alpha", "gamma") {
                "A"
            } else if has("beta", "alpha") {
                "B"
            } else if has("gamma", "alpha") {
                "A" // position bias: first slot wins the A-C pair
            } else if has("beta", "gamma") {
                "A"
            } else {
                "B" // (gamma, beta) → beta
            };
            Some(format!(r#"{{"winner": "{winner}"}}"#))
        }));
        let candidates = vec![
            candidate("j1", "alpha joke"),
            candidate("j2", "beta joke"),
            candidate("j3", "gamma joke"),
        ];
        let rates = run_pairwise(
            &candidates,
            &topic(),
            &g,
            &TemplateStore::builtin(),
            &Parallelism::sequential(),
        )
        .unwrap();
        assert_eq!(rates["j1"], 0.75);
    }

    #[test]
    fn skipped_comparisons_leave_the_denominator() {
        // The judge can never decide j1-vs-j2 comparisons; both orders skip.
        let g = gateway(ScriptedBackend::new().on(|req| {
            let (a, b) = extract_pair(&req.user_prompt);
            if a.contains("alpha") && b.contains("beta") || a.contains("beta") && b.contains("alpha")
            {
                Some("cannot decide".into())
            } else {
                Some(r#"{"winner": "A"}"#.into())
            }
        }));
        let candidates = vec![
            candidate("j1", "alpha joke"),
            candidate("j2", "beta joke"),
            candidate("j3", "gamma joke"),
        ];
        let items: Vec<(String, String)> = candidates
            .iter()
            .map(|c| (c.id.clone(), c.text.clone()))
            .collect();
        let outcome = pairwise_tournament(
            &items,
            "topic",
            &g,
            &TemplateStore::builtin(),
            &Parallelism::sequential(),
        )
        .unwrap();
        assert_eq!(outcome.skipped.len(), 2);
        assert_eq!(outcome.participations["j1"], 2); // only the j1-j3 pair
        assert_eq!(outcome.win_rates["j1"], 0.5); // wins (j1,j3); loses (j3,j1)
    }

    #[test]
    fn singleton_gets_the_half_convention_and_empty_stays_empty() {
        let g = gateway(ScriptedBackend::new());
        let rates = run_pairwise(
            &[candidate("only", "x")],
            &topic(),
            &g,
            &TemplateStore::builtin(),
            &Parallelism::sequential(),
        )
        .unwrap();
        assert_eq!(rates["only"], 0.5);
        let rates = run_pairwise(
            &[],
            &topic(),
            &g,
            &TemplateStore::builtin(),
            &Parallelism::sequential(),
        )
        .unwrap();
        assert!(rates.is_empty());
    }

    #[test]
    fn relevance_is_cosine_against_the_topic() {
        let embedder = HashedEmbedder::new();
        let t = topic();
        let same = candidate("j", "trains running late");
        assert_eq!(score_relevance(&same, &t, &embedder).unwrap(), 1.0);

        let disjoint = candidate("j", "quantum spreadsheet sandwich");
        let sim = score_relevance(&disjoint, &t, &embedder).unwrap();
        assert!(sim <= 0.1, "disjoint-token relevance was {sim}");

        let twice_a = score_relevance(&same, &t, &embedder).unwrap();
        let twice_b = score_relevance(&same, &t, &embedder).unwrap();
        assert_eq!(twice_a, twice_b);
    }

    #[test]
    fn signal_validation_catches_range_violations() {
        let mut raw = raw_signals();
        raw.validate().unwrap();
        raw.direct_vote = 0;
        assert!(raw.validate().is_err());
        let mut raw = raw_signals();
        raw.win_rate = 1.5;
        assert!(raw.validate().is_err());
        let mut raw = raw_signals();
        raw.persona_scores.insert(Persona::CriticalCritic, 11.0);
        assert!(raw.validate().is_err());
    }
}
