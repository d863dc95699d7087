//! Run and experiment report documents.
//!
//! Reports are JSON with a stable schema: a `kind` discriminator, a
//! schema version, a header quarantining the timestamp, and a body that
//! serializes canonically so determinism checks can compare bodies byte
//! for byte.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::hucot::{HucotTrace, HumorStyle};
use crate::novelty::FilterReport;
use crate::planner::{Strategy, StrategyOrigin, Topic};
use crate::revision::IterationRecord;
use crate::scoring::{NormalizedSignals, ScoredJoke, SignalScores};
use crate::stats::MeanCi;

pub const REPORT_SCHEMA_VERSION: &str = "1";

/// Timestamps live here and nowhere else, so the body stays deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub created_at_unix: u64,
    pub tool: String,
}

impl ReportHeader {
    pub fn now() -> Self {
        let created_at_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ReportHeader {
            created_at_unix,
            tool: format!("humorgen {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

/// One ranked joke with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedJoke {
    pub rank: usize,
    pub id: String,
    pub text: String,
    pub trace: HucotTrace,
    pub iteration: u32,
    pub strategy_id: String,
    pub strategy_title: String,
    pub strategy_origin: StrategyOrigin,
    pub signals: SignalScores,
    pub normalized: NormalizedSignals,
    pub hybrid_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregate {
    pub mean_hybrid_score: Option<f64>,
    pub joke_count: usize,
}

/// Body of a single pipeline run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunBody {
    pub run_id: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub topic: Topic,
    pub style: HumorStyle,
    pub config: PipelineConfig,
    pub ranked: Vec<RankedJoke>,
    /// Every strategy the run touched, so lineage references resolve.
    pub strategies: Vec<Strategy>,
    pub filter_reports: Vec<FilterReport>,
    pub iterations: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub version: String,
    pub header: ReportHeader,
    pub body: RunBody,
}

impl RunReport {
    pub fn new(body: RunBody) -> Self {
        RunReport {
            kind: "run-report".to_string(),
            version: REPORT_SCHEMA_VERSION.to_string(),
            header: ReportHeader::now(),
            body,
        }
    }

    /// Canonical serialization of the body alone (header excluded), the
    /// unit of byte-level determinism checks.
    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let report: RunReport = serde_json::from_str(raw)?;
        if report.kind != "run-report" {
            return Err(Error::Config(format!(
                "expected a run-report document, got kind {}",
                report.kind
            )));
        }
        Ok(report)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }
}

/// Assemble ranked entries from scored jokes and the strategy registry.
pub fn ranked_entries(scored: &[ScoredJoke], strategies: &[Strategy]) -> Vec<RankedJoke> {
    scored
        .iter()
        .enumerate()
        .map(|(index, joke)| {
            let strategy = strategies
                .iter()
                .find(|s| s.id == joke.candidate.strategy_id);
            RankedJoke {
                rank: index + 1,
                id: joke.candidate.id.clone(),
                text: joke.candidate.text.clone(),
                trace: joke.candidate.trace.clone(),
                iteration: joke.candidate.iteration,
                strategy_id: joke.candidate.strategy_id.clone(),
                strategy_title: strategy.map(|s| s.title.clone()).unwrap_or_default(),
                strategy_origin: strategy
                    .map(|s| s.origin.clone())
                    .unwrap_or(StrategyOrigin::FirstOrder),
                signals: joke.raw.clone(),
                normalized: joke.score.signals,
                hybrid_score: joke.score.value,
            }
        })
        .collect()
}

/// One aggregate row of the four-configuration comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub config: String,
    pub style: String,
    pub stats: Option<MeanCi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub config: String,
    pub style: String,
    pub topic_id: String,
    pub replicate: u32,
    pub error: String,
}

/// Per-config win/comparison matrices from a global tournament.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentMatrix {
    pub configs: Vec<String>,
    pub top_k: usize,
    /// `wins[i][j]`: comparisons between config i and config j won by i
    /// (diagonal: same-config comparisons, always won by that config).
    pub wins: Vec<Vec<u32>>,
    /// `comparisons[i][j]`: judged comparisons pairing config i against
    /// config j, each counted once per row. Row sums equal the number of
    /// comparisons the config participated in.
    pub comparisons: Vec<Vec<u32>>,
    pub joke_win_rates: BTreeMap<String, f64>,
    pub skipped: usize,
}

impl TournamentMatrix {
    pub fn row_sum(&self, i: usize) -> u32 {
        self.comparisons[i].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBody {
    pub rows: Vec<ComparisonRow>,
    pub config_totals: Vec<ComparisonRow>,
    pub failed_cells: Vec<CellFailure>,
    pub bootstrap_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tournament: Option<TournamentMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub kind: String,
    pub version: String,
    pub header: ReportHeader,
    pub body: ComparisonBody,
}

impl ComparisonReport {
    pub fn new(body: ComparisonBody) -> Self {
        ComparisonReport {
            kind: "comparison-report".to_string(),
            version: REPORT_SCHEMA_VERSION.to_string(),
            header: ReportHeader::now(),
            body,
        }
    }

    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let report: ComparisonReport = serde_json::from_str(raw)?;
        if report.kind != "comparison-report" {
            return Err(Error::Config(format!(
                "expected a comparison-report document, got kind {}",
                report.kind
            )));
        }
        Ok(report)
    }

    pub fn row(&self, config: &str, style: &str) -> Option<&ComparisonRow> {
        self.body
            .rows
            .iter()
            .find(|r| r.config == config && r.style == style)
    }
}

// ---------------------------------------------------------------------------
// Text-table rendering
// ---------------------------------------------------------------------------

/// Render a report document as an aligned text table, dispatching on the
/// `kind` field.
pub fn render_table(raw: &str) -> Result<String> {
    let value: serde_json::Value = serde_json::from_str(raw)?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("run-report") => Ok(render_run_table(&RunReport::from_json(raw)?)),
        Some("comparison-report") => Ok(render_comparison_table(&ComparisonReport::from_json(raw)?)),
        Some("tournament-report") => {
            let matrix: TournamentMatrix = serde_json::from_value(value["body"].clone())?;
            Ok(render_tournament_table(&matrix))
        }
        other => Err(Error::Config(format!(
            "cannot render document of kind {other:?}"
        ))),
    }
}

fn render_tournament_table(matrix: &TournamentMatrix) -> String {
    let mut rows = vec![[vec!["wins".to_string()], matrix.configs.clone()].concat()];
    for (i, config) in matrix.configs.iter().enumerate() {
        let mut row = vec![config.clone()];
        row.extend(matrix.wins[i].iter().map(u32::to_string));
        rows.push(row);
    }
    let mut out = format!("tournament over top-{} jokes per report\n{}", matrix.top_k, align(&rows));
    out.push_str("\nper-joke win rates:\n");
    let mut entries: Vec<(&String, &f64)> = matrix.joke_win_rates.iter().collect();
    entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for (key, rate) in entries.into_iter().take(20) {
        out.push_str(&format!("  {rate:.3}  {key}\n"));
    }
    if matrix.skipped > 0 {
        out.push_str(&format!("skipped comparisons: {}\n", matrix.skipped));
    }
    out
}

fn render_run_table(report: &RunReport) -> String {
    let body = &report.body;
    let mut rows = vec![vec![
        "rank".to_string(),
        "score".to_string(),
        "win".to_string(),
        "strategy".to_string(),
        "joke".to_string(),
    ]];
    for joke in &body.ranked {
        rows.push(vec![
            joke.rank.to_string(),
            format!("{:.3}", joke.hybrid_score),
            format!("{:.2}", joke.signals.win_rate),
            truncate(&joke.strategy_title, 28),
            truncate(&joke.text, 56),
        ]);
    }
    let mean = body
        .aggregate
        .mean_hybrid_score
        .map(|m| format!("{m:.3}"))
        .unwrap_or_else(|| "-".to_string());
    format!(
        "run {} [{}] topic: {} (style {}, status {})\n{}\njokes: {}  mean score: {}\n",
        body.run_id,
        body.config.variant(),
        body.topic.text,
        body.style,
        body.status,
        align(&rows),
        body.aggregate.joke_count,
        mean,
    )
}

fn render_comparison_table(report: &ComparisonReport) -> String {
    let mut rows = vec![vec![
        "config".to_string(),
        "style".to_string(),
        "n".to_string(),
        "mean".to_string(),
        "ci95".to_string(),
    ]];
    for row in report.body.rows.iter().chain(&report.body.config_totals) {
        let (n, mean, ci) = match &row.stats {
            Some(s) => (
                s.n.to_string(),
                format!("{:.3}", s.mean),
                format!("[{:.3}, {:.3}]", s.ci_lower, s.ci_upper),
            ),
            None => ("0".to_string(), "-".to_string(), "-".to_string()),
        };
        rows.push(vec![row.config.clone(), row.style.clone(), n, mean, ci]);
    }
    let mut out = align(&rows);
    if !report.body.failed_cells.is_empty() {
        out.push_str(&format!(
            "\nfailed cells: {}\n",
            report.body.failed_cells.len()
        ));
    }
    if let Some(t) = &report.body.tournament {
        out.push_str("\ntournament wins (row beats column):\n");
        let mut trows = vec![[vec![String::new()], t.configs.clone()].concat()];
        for (i, config) in t.configs.iter().enumerate() {
            let mut row = vec![config.clone()];
            row.extend(t.wins[i].iter().map(u32::to_string));
            trows.push(row);
        }
        out.push_str(&align(&trows));
    }
    out
}

fn truncate(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        text.to_string()
    } else {
        let head: String = text.chars().take(max.saturating_sub(1)).collect();
        format!("{head}…")
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
