//! Style-templated chain-of-thought joke generation.
//!
//! Each humor style carries a fixed multi-step reasoning template. The
//! generation model must answer with exactly that many numbered steps and
//! a final `JOKE:` line; the parser enforces the format mechanically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelRole};
use crate::planner::{Strategy, Topic};
use crate::templates::{first_placeholder, TemplateStore};

const SYSTEM_GENERATION: &str = "You are an expert comedy writer. You follow \
the given reasoning steps exactly and answer in the exact output format \
requested: numbered steps, then a single final line starting with JOKE:.";

/// Extra generation attempts after a malformed reply.
const GENERATION_REPAIRS: u32 = 2;

/// The three supported humor styles. The reasoning step count is fixed
/// per style.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum HumorStyle {
    Generic,
    Indian,
    GenzIndian,
}

impl HumorStyle {
    pub const ALL: [HumorStyle; 3] = [
        HumorStyle::Generic,
        HumorStyle::Indian,
        HumorStyle::GenzIndian,
    ];

    /// Number of reasoning steps the style's template prescribes.
    pub fn step_count(&self) -> usize {
        match self {
            HumorStyle::Generic => 8,
            HumorStyle::Indian => 6,
            HumorStyle::GenzIndian => 7,
        }
    }

    /// What the style's reasoning concentrates on.
    pub fn focus(&self) -> &'static str {
        match self {
            HumorStyle::Generic => "universal comedic structures, timing, and punchline design",
            HumorStyle::Indian => "cultural micro-context, shared experiences, and delivery",
            HumorStyle::GenzIndian => "dark reality, meme culture, and cultural code-switching",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HumorStyle::Generic => "generic",
            HumorStyle::Indian => "indian",
            HumorStyle::GenzIndian => "genz-indian",
        }
    }

    /// Template-store name of the style's step template.
    pub fn template_name(&self) -> &'static str {
        match self {
            HumorStyle::Generic => "hucot_generic",
            HumorStyle::Indian => "hucot_indian",
            HumorStyle::GenzIndian => "hucot_genz_indian",
        }
    }
}

impl std::fmt::Display for HumorStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for HumorStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(HumorStyle::Generic),
            "indian" => Ok(HumorStyle::Indian),
            "genz-indian" => Ok(HumorStyle::GenzIndian),
            other => Err(Error::Config(format!(
                "unknown style `{other}` (expected generic, indian, or genz-indian)"
            ))),
        }
    }
}

/// A style's reasoning template: the raw prompt body plus the parsed step
/// prompts, validated against the style's declared step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HucotTemplate {
    pub style: HumorStyle,
    pub steps: Vec<String>,
    body: String,
}

impl HucotTemplate {
    /// Parse a template body, checking it carries exactly the style's
    /// step count and no empty steps.
    pub fn parse(style: HumorStyle, body: &str) -> Result<Self> {
        let (steps, _) = scan_numbered_steps(body);
        if steps.len() != style.step_count() {
            return Err(Error::StepCountMismatch {
                expected: style.step_count(),
                found: steps.len(),
            });
        }
        if steps.iter().any(|(_, text)| text.is_empty()) {
            return Err(Error::MalformedTrace("template has an empty step".into()));
        }
        Ok(HucotTemplate {
            style,
            steps: steps.into_iter().map(|(_, text)| text).collect(),
            body: body.to_string(),
        })
    }

    /// Load the style's template from the store.
    pub fn load(style: HumorStyle, templates: &TemplateStore) -> Result<Self> {
        Self::parse(style, templates.raw(style.template_name())?)
    }
}

/// The ordered reasoning steps behind one joke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HucotTrace {
    /// (label, reasoning) pairs; labels are the step numbers as written.
    pub steps: Vec<(String, String)>,
}

impl HucotTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step texts joined for judge prompts.
    pub fn as_prompt_block(&self) -> String {
        self.steps
            .iter()
            .map(|(label, text)| format!("{label}. {text}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A generated joke with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JokeCandidate {
    pub id: String,
    pub text: String,
    pub trace: HucotTrace,
    pub strategy_id: String,
    pub topic_id: String,
    pub iteration: u32,
    pub style: HumorStyle,
}

/// Render the full generation prompt: template body with placeholders
/// filled, plus the mechanical output-format instructions.
pub fn render_prompt(
    strategy: &Strategy,
    topic: &Topic,
    template: &HucotTemplate,
) -> Result<String> {
    if template.style != strategy.style {
        return Err(Error::Config(format!(
            "template style {} does not match strategy style {}",
            template.style, strategy.style
        )));
    }
    let filled = crate::templates::fill(
        &template.body,
        &[
            ("topic", &topic.text),
            ("style", topic.style.as_str()),
            ("strategy_title", &strategy.title),
            ("strategy_description", &strategy.description),
        ],
    );
    if let Some(placeholder) = first_placeholder(&filled) {
        return Err(Error::UnresolvedPlaceholder {
            name: template.style.template_name().to_string(),
            placeholder,
        });
    }
    let n = template.style.step_count();
    Ok(format!(
        "{filled}\n\nOutput format:\n\
         Write your reasoning as exactly {n} numbered lines (`1.` through `{n}.`), one per step.\n\
         Then write exactly one final line starting with `JOKE:` followed by the finished joke.\n\
         Do not write anything after the JOKE line."
    ))
}

/// Scan text for numbered step lines (`N.` or `N)`), folding continuation
/// lines into the current step. Returns the steps and the remaining
/// unconsumed lines (preamble and whatever follows a `JOKE:` marker is
/// handled by the caller).
fn scan_numbered_steps(text: &str) -> (Vec<(u32, String)>, Vec<&str>) {
    let mut steps: Vec<(u32, String)> = Vec::new();
    let mut rest: Vec<&str> = Vec::new();
    for line in text.lines() {
        if let Some((number, body)) = split_step_line(line) {
            steps.push((number, body.trim().to_string()));
        } else if let Some((_, current)) = steps.last_mut() {
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with("JOKE:") {
                if !current.is_empty() {
                    current.push(' ');
                }
                current.push_str(trimmed);
            } else {
                rest.push(line);
            }
        } else {
            rest.push(line);
        }
    }
    (steps, rest)
}

fn split_step_line(line: &str) -> Option<(u32, &str)> {
    let trimmed = line.trim_start();
    let digits: usize = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let after = &trimmed[digits..];
    let marker = after.strip_prefix('.').or_else(|| after.strip_prefix(')'))?;
    if !marker.is_empty() && !marker.starts_with(' ') && !marker.starts_with('\t') {
        return None;
    }
    let number: u32 = trimmed[..digits].parse().ok()?;
    Some((number, marker))
}

/// Parse raw model output into a validated trace plus the joke text.
///
/// Requires exactly `style.step_count()` steps numbered 1..=N in order,
/// each non-empty, and a `JOKE:` line with a non-empty payload. Step and
/// joke text is whitespace-normalized, so a formatted trace re-parses to
/// the identical value.
pub fn parse_trace(raw: &str, style: HumorStyle) -> Result<(HucotTrace, String)> {
    if raw.trim().is_empty() {
        return Err(Error::MalformedTrace("empty model output".into()));
    }
    let mut before_joke: Vec<&str> = Vec::new();
    let mut joke_parts: Vec<&str> = Vec::new();
    let mut seen_marker = false;
    for line in raw.lines() {
        if seen_marker {
            joke_parts.push(line);
        } else if let Some(payload) = line.trim_start().strip_prefix("JOKE:") {
            seen_marker = true;
            joke_parts.push(payload);
        } else {
            before_joke.push(line);
        }
    }
    if !seen_marker {
        return Err(Error::MissingJokeMarker);
    }
    let before_joke = before_joke.join("\n");
    let joke_text = normalize_ws(&joke_parts.join(" "));
    if joke_text.is_empty() {
        return Err(Error::MalformedTrace("JOKE line has no payload".into()));
    }

    let (steps, _) = scan_numbered_steps(&before_joke);
    if steps.len() != style.step_count() {
        return Err(Error::StepCountMismatch {
            expected: style.step_count(),
            found: steps.len(),
        });
    }
    for (index, (number, text)) in steps.iter().enumerate() {
        if *number as usize != index + 1 {
            return Err(Error::MalformedTrace(format!(
                "step {} is numbered {number}, expected {}",
                index + 1,
                index + 1
            )));
        }
        if text.is_empty() {
            return Err(Error::MalformedTrace(format!("step {number} is empty")));
        }
    }
    let trace = HucotTrace {
        steps: steps
            .into_iter()
            .map(|(number, text)| (number.to_string(), text))
            .collect(),
    };
    Ok((trace, joke_text))
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Serialize a trace and joke back into the output format `parse_trace`
/// accepts. `parse_trace(format_output(t, j)) == (t, j)` for parsed values.
pub fn format_output(trace: &HucotTrace, joke: &str) -> String {
    let mut out = String::new();
    for (label, text) in &trace.steps {
        out.push_str(label);
        out.push_str(". ");
        out.push_str(text);
        out.push('\n');
    }
    out.push_str("JOKE: ");
    out.push_str(joke);
    out.push('\n');
    out
}

/// Generate one validated joke candidate for a strategy. Malformed model
/// output triggers a repair prompt, up to [`GENERATION_REPAIRS`] extra
/// attempts; exhaustion is an error.
pub fn generate_joke(
    strategy: &Strategy,
    topic: &Topic,
    style: HumorStyle,
    id: String,
    iteration: u32,
    gateway: &Gateway,
    templates: &TemplateStore,
) -> Result<JokeCandidate> {
    if strategy.style != style || topic.style != style {
        return Err(Error::Config(format!(
            "strategy/topic/style mismatch: strategy={}, topic={}, requested={style}",
            strategy.style, topic.style
        )));
    }
    let template = HucotTemplate::load(style, templates)?;
    let prompt = render_prompt(strategy, topic, &template)?;
    let attempts = GENERATION_REPAIRS + 1;
    let mut last_error = String::new();
    for attempt in 0..attempts {
        let user_prompt = if attempt == 0 {
            prompt.clone()
        } else {
            format!(
                "{prompt}\n\nYour previous reply was rejected: {last_error}. \
                 Follow the output format exactly this time."
            )
        };
        let request = gateway.request(ModelRole::Generation, SYSTEM_GENERATION, user_prompt);
        let response = gateway.complete(&request, "generate.joke")?;
        match parse_trace(&response.text, style) {
            Ok((trace, text)) => {
                if trace.steps.iter().any(|(_, step)| *step == text) {
                    last_error = "the joke text repeats a reasoning step verbatim".to_string();
                    continue;
                }
                return Ok(JokeCandidate {
                    id,
                    text,
                    trace,
                    strategy_id: strategy.id.clone(),
                    topic_id: topic.id.clone(),
                    iteration,
                    style,
                });
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(Error::GenerationExhausted {
        attempts,
        message: last_error,
    })
}
