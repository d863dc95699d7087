//! Command-line driver for the humor generation pipeline.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use humorgen::hucot::HumorStyle;
use humorgen::kg::KnowledgeGraph;
use humorgen::pipeline::{global_tournament, run_experiment, run_pipeline, ExperimentSpec, Services};
use humorgen::planner::Topic;
use humorgen::report::{render_table, ReportHeader, RunReport, TournamentMatrix, REPORT_SCHEMA_VERSION};
use humorgen::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "humorgen",
    version,
    about = "Plan-search humor generation: strategies, chain-of-thought jokes, hybrid judge scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for one topic and emit a run report.
    Run(RunArgs),
    /// Run the four-configuration comparison grid from a spec file.
    Experiment(ExperimentArgs),
    /// Round-robin the top jokes of several run reports against each other.
    Tournament(TournamentArgs),
    /// Inspect or maintain the strategy knowledge graph.
    #[command(subcommand)]
    Kg(KgCommand),
    /// Render a stored report as a table or pass it through as JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Topic text to generate jokes about.
    #[arg(long)]
    topic: String,
    /// Humor style: generic, indian, or genz-indian.
    #[arg(long)]
    style: String,
    /// Pipeline config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Enable knowledge-graph enhancement regardless of the config file.
    #[arg(long)]
    use_kg: bool,
    /// Enable the revision loop regardless of the config file.
    #[arg(long)]
    use_revision: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<i64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec file (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Write the comparison report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TournamentArgs {
    /// Run-report files to draw jokes from.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Jokes taken from the top of each report.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    /// Pipeline config supplying the judge backend.
    #[arg(long)]
    config: PathBuf,
    /// Write the tournament report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum KgCommand {
    /// Print summary statistics for a graph file.
    Inspect {
        #[arg(long)]
        path: PathBuf,
    },
    /// List nodes, best mean performance first.
    List {
        #[arg(long)]
        path: PathBuf,
        /// Restrict to one style.
        #[arg(long)]
        style: Option<String>,
    },
    /// Remove nodes whose mean performance is below the floor.
    Prune {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        min_mean: f64,
        /// Report what would be removed without rewriting the file.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// Stored report document (run, comparison, or tournament).
    #[arg(long)]
    input: PathBuf,
    /// table (aligned text) or machine (canonical JSON).
    #[arg(long, default_value = "table")]
    format: String,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Tournament(args) => cmd_tournament(args),
        Command::Kg(args) => cmd_kg(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if args.use_kg {
        config.use_kg = true;
    }
    if args.use_revision {
        config.use_revision = true;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let style = HumorStyle::from_str(&args.style)?;
    let topic = Topic::from_text(&args.topic, style)?;
    let services = Services::from_config(config)?;
    let report = run_pipeline(&topic, style, &services)?;
    let incomplete = report.body.status != "complete";
    emit(args.out.as_deref(), &report.to_json()?)?;
    if incomplete {
        bail!(
            "run finished incomplete: {}",
            report.body.error.as_deref().unwrap_or("unknown stage failure")
        );
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&args.spec)
        .with_context(|| format!("loading spec {}", args.spec.display()))?;
    let base = &spec.base;
    let backend: Arc<dyn humorgen::gateway::ChatBackend> =
        Arc::new(humorgen::gateway::HttpChatBackend::new(
            base.gateway.base_url.clone(),
            base.gateway.api_key_env.clone(),
        )?);
    let embedder: Arc<dyn humorgen::Embedder> = match base.embedding.kind.as_str() {
        "external-service" => Arc::new(humorgen::embedding::HttpEmbedder::new(
            base.embedding.base_url.clone(),
            base.embedding.model.clone(),
            base.embedding.api_key_env.clone(),
        )?),
        _ => Arc::new(humorgen::HashedEmbedder::new()),
    };
    let report = run_experiment(&spec, backend, embedder)?;
    emit(args.out.as_deref(), &report.to_json()?)
}

fn cmd_tournament(args: TournamentArgs) -> Result<()> {
    if args.top_k == 0 {
        bail!("--top-k must be at least 1");
    }
    let reports: Vec<RunReport> = args
        .reports
        .iter()
        .map(|path| RunReport::load(path).with_context(|| format!("loading {}", path.display())))
        .collect::<Result<_>>()?;
    let config = PipelineConfig::load(&args.config)?;
    let services = Services::from_config(config)?;
    let matrix = global_tournament(&reports, args.top_k, &services)?;
    emit(args.out.as_deref(), &tournament_document(&matrix)?)
}

fn tournament_document(matrix: &TournamentMatrix) -> Result<String> {
    let doc = serde_json::json!({
        "kind": "tournament-report",
        "version": REPORT_SCHEMA_VERSION,
        "header": ReportHeader::now(),
        "body": matrix,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

fn cmd_kg(command: KgCommand) -> Result<()> {
    match command {
        KgCommand::Inspect { path } => {
            let graph = KnowledgeGraph::load(&path)?;
            println!("graph: {}", path.display());
            println!("nodes: {}", graph.node_count());
            println!("edges: {}", graph.edge_count());
            for style in HumorStyle::ALL {
                let count = graph.nodes().filter(|n| n.style == style).count();
                if count > 0 {
                    println!("  {style}: {count} node(s)");
                }
            }
            let best = graph
                .nodes()
                .max_by(|a, b| a.mean_performance.total_cmp(&b.mean_performance));
            if let Some(node) = best {
                println!(
                    "best: {} (mean {:.2} over {} run(s))",
                    node.node_id,
                    node.mean_performance,
                    node.performance_history.len()
                );
            }
        }
        KgCommand::List { path, style } => {
            let graph = KnowledgeGraph::load(&path)?;
            let filter = style.map(|s| HumorStyle::from_str(&s)).transpose()?;
            let mut nodes: Vec<_> = graph
                .nodes()
                .filter(|n| filter.map_or(true, |s| n.style == s))
                .collect();
            nodes.sort_by(|a, b| {
                b.mean_performance
                    .total_cmp(&a.mean_performance)
                    .then_with(|| a.node_id.cmp(&b.node_id))
            });
            for node in nodes {
                let title = node.strategy_text.lines().next().unwrap_or("");
                println!(
                    "{}  {:<12} mean {:.2}  runs {:>2}  {}",
                    node.node_id,
                    node.style.to_string(),
                    node.mean_performance,
                    node.performance_history.len(),
                    title
                );
            }
        }
        KgCommand::Prune { path, min_mean, dry_run } => {
            let mut graph = KnowledgeGraph::load(&path)?;
            let before = graph.node_count();
            let removed = graph.prune_below(min_mean);
            if dry_run {
                println!("would remove {removed} of {before} node(s) below mean {min_mean}");
            } else {
                graph.save(&path)?;
                println!("removed {removed} of {before} node(s) below mean {min_mean}");
            }
        }
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let raw = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    match args.format.as_str() {
        "table" => print!("{}", render_table(&raw)?),
        "machine" => {
            // Canonicalized pass-through: parse and re-emit.
            let value: serde_json::Value = serde_json::from_str(&raw)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        other => bail!("unknown format {other} (expected table or machine)"),
    }
    Ok(())
}
