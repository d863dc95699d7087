//! Shared scripted fixtures: a backend that plays every role in the
//! pipeline deterministically, with a quality bias hook for ablation
//! tests.

use humorgen::gateway::{ChatRequest, ModelRole, ScriptedBackend};

/// Marker word injected by the scripted adapt/revise responders. Jokes
/// generated from marked strategies carry it, and the scripted judges
/// score marked jokes higher, so KG-adapted and revised strategies beat
/// plain ones end to end.
pub const BIAS_MARKER: &str = "zesty";

pub fn fnv(text: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn line_after<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines()
        .find_map(|l| l.trim_start().strip_prefix(prefix))
        .map(str::trim)
}

fn int_after(text: &str, prefix: &str) -> Option<usize> {
    let at = text.find(prefix)? + prefix.len();
    let rest = &text[at..];
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn strategies_reply(n: usize, topic: &str) -> String {
    let vocab = [
        "escalating literalism",
        "status reversal",
        "absurd specificity",
        "deadpan inventory",
        "misplaced formality",
        "tiny stakes epic framing",
        "over-engineered workaround",
        "polite catastrophe",
        "bureaucratic fantasy",
        "confident wrongness",
        "reverse nostalgia",
        "heroic pettiness",
        "suspicious optimism",
        "committee of one",
    ];
    let items: Vec<String> = (0..n)
        .map(|i| {
            let angle = vocab[i % vocab.len()];
            format!(
                r#"{{"title": "Angle {i}: {angle}", "description": "Apply {angle} to {topic}, building the gap between expectation and detail variant {i}."}}"#
            )
        })
        .collect();
    format!(r#"{{"strategies": [{}]}}"#, items.join(","))
}

fn joke_reply(req: &ChatRequest) -> Option<String> {
    let steps = int_after(&req.user_prompt, "as exactly ")?;
    let topic = line_after(&req.user_prompt, "Topic:").unwrap_or("something");
    let strategy = line_after(&req.user_prompt, "Strategy to execute:").unwrap_or("an angle");
    let marked = req.user_prompt.contains(BIAS_MARKER);
    let tag = fnv(strategy) % 100_000;
    let mut out = String::new();
    for i in 1..=steps {
        out.push_str(&format!("{i}. working step {i} toward the angle\n"));
    }
    let marker = if marked { format!("{BIAS_MARKER} ") } else { String::new() };
    out.push_str(&format!(
        "JOKE: {marker}a {topic} bit where tactic{tag} collides with reality number{tag}\n"
    ));
    Some(out)
}

fn extract_joke_pair(prompt: &str) -> Option<(String, String)> {
    let a_start = prompt.find("JOKE A:")? + 7;
    let b_start = prompt.find("JOKE B:")?;
    let a = prompt[a_start..b_start].trim().to_string();
    let b_body = &prompt[b_start + 7..];
    let b_end = b_body.find("Reply").unwrap_or(b_body.len());
    Some((a, b_body[..b_end].trim().to_string()))
}

/// Persona/direct scores get a deterministic per-joke variation so score
/// distributions are not degenerate.
fn quality(joke: &str) -> (i64, f64) {
    let noise = (fnv(joke) % 5) as f64 * 0.5; // 0.0 .. 2.0
    if joke.contains(BIAS_MARKER) {
        (5, 7.0 + noise)
    } else {
        (3, 4.0 + noise)
    }
}

/// A backend that can answer every request the pipeline issues.
pub fn full_backend() -> ScriptedBackend {
    ScriptedBackend::new()
        // strategy role: first-order proposals
        .on(|req| {
            if req.role != ModelRole::Strategy || !req.user_prompt.contains("Propose ") {
                return None;
            }
            let n = int_after(&req.user_prompt, "Propose ")?;
            let topic = line_after(&req.user_prompt, "Topic:").unwrap_or("the topic");
            Some(strategies_reply(n, topic))
        })
        // strategy role: hybrid fusion
        .on(|req| {
            if req.role != ModelRole::Strategy
                || !req.user_prompt.contains("Combine these two humor strategies")
            {
                return None;
            }
            let tag = fnv(&req.user_prompt) % 100_000;
            Some(format!(
                r#"{{"title": "Fused angle {tag}", "description": "A hybrid mechanism layering both parents into one build fusion{tag}."}}"#
            ))
        })
        // strategy role: KG adaptation (marked)
        .on(|req| {
            if req.role != ModelRole::Strategy
                || !req.user_prompt.contains("Rewrite it for the new topic")
            {
                return None;
            }
            let tag = fnv(&req.user_prompt) % 100_000;
            Some(format!(
                r#"{{"title": "Proven {BIAS_MARKER} angle {tag}", "description": "A historically strong mechanism re-aimed at the topic, {BIAS_MARKER} retool{tag}."}}"#
            ))
        })
        // strategy role: revision (marked)
        .on(|req| {
            if req.role != ModelRole::Strategy
                || !req.user_prompt.contains("Revise this humor strategy")
            {
                return None;
            }
            let tag = fnv(&req.user_prompt) % 100_000;
            Some(format!(
                r#"{{"title": "Revised {BIAS_MARKER} angle {tag}", "description": "The original mechanism sharpened per the suggestion, {BIAS_MARKER} rework{tag}."}}"#
            ))
        })
        // generation role: chain-of-thought joke output
        .on(|req| {
            if req.role != ModelRole::Generation {
                return None;
            }
            joke_reply(req)
        })
        // judge role: direct vote
        .on(|req| {
            if req.role != ModelRole::Judge || !req.user_prompt.contains("Rate this joke") {
                return None;
            }
            let joke = req.user_prompt.split("Joke:").nth(1).unwrap_or("");
            let (vote, _) = quality(joke);
            Some(format!(r#"{{"score": {vote}}}"#))
        })
        // judge role: persona scoring
        .on(|req| {
            if req.role != ModelRole::Judge || !req.user_prompt.contains("Score this joke") {
                return None;
            }
            let joke = req.user_prompt.split("Joke:").nth(1).unwrap_or("");
            let (_, base) = quality(joke);
            let lean = if req.system_prompt.contains("critic") {
                -0.5
            } else if req.system_prompt.contains("enthusiastic") {
                0.5
            } else {
                0.0
            };
            Some(format!(r#"{{"score": {}}}"#, (base + lean).clamp(0.0, 10.0)))
        })
        // judge role: pairwise comparison
        .on(|req| {
            if req.role != ModelRole::Judge
                || !req.user_prompt.contains("Decide which one is funnier")
            {
                return None;
            }
            let (a, b) = extract_joke_pair(&req.user_prompt)?;
            let (qa, qb) = (quality(&a), quality(&b));
            let winner = match qa.1.total_cmp(&qb.1) {
                std::cmp::Ordering::Greater => "A",
                std::cmp::Ordering::Less => "B",
                std::cmp::Ordering::Equal => {
                    if a <= b {
                        "A"
                    } else {
                        "B"
                    }
                }
            };
            Some(format!(r#"{{"winner": "{winner}"}}"#))
        })
        // judge role: improvement suggestions
        .on(|req| {
            if req.role != ModelRole::Judge || !req.user_prompt.contains("underperforming") {
                return None;
            }
            Some(format!(
                r#"{{"suggestion": "lean into a {BIAS_MARKER} escalation instead of generic framing", "projected_gain": 0.6}}"#
            ))
        })
}
