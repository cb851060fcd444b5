use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use toolgraph_core::config::{shared, EngineConfig};
use toolgraph_core::evalkit::{load_dataset, parse_stages, run_eval, EvalOptions};
use toolgraph_core::ingest::{
    dedup_entities, ingest_code, ingest_document, LanguageProfile, ParsedDocument, Providers,
};
use toolgraph_core::orchestrator::{export_trajectories, Limits, Status, Task};
use toolgraph_core::retrieval::{assemble_context, retrieve};
use toolgraph_core::{NodeKind, PropertyGraph};

/// Knowledge-graph backed tool orchestration.
#[derive(Parser, Debug)]
#[command(name = "toolgraph", version, subcommand_required = true, arg_required_else_help = true)]
struct Cli {
    /// Engine config file (key = value). Defaults to $TOOLGRAPH_CONFIG.
    #[arg(long, global = true, env = "TOOLGRAPH_CONFIG")]
    config: Option<PathBuf>,
    /// Graph file, overriding the config's `graph` key.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct LimitArgs {
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    max_repairs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Add a parsed document (JSON) or a source file to the graph.
    Ingest {
        path: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Solve a task and print its trajectory.
    Solve {
        question: String,
        #[command(flatten)]
        limits: LimitArgs,
        /// Append the trajectory as a JSONL record.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the assembled graph context for a query.
    Query {
        query: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Run a dataset through the engine and score it.
    Eval {
        dataset: PathBuf,
        /// Comma-separated stages (planning, selection, calling, response) or `all`.
        #[arg(long, default_value = "all")]
        stages: String,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        limits: LimitArgs,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graph file maintenance.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Merge duplicate entities.
    Dedup {
        #[arg(long)]
        cos: Option<f64>,
        #[arg(long)]
        lev: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum GraphAction {
    /// Write the graph as JSONL (stdout unless --out).
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace the graph with a JSONL file.
    Import { file: PathBuf },
    /// Node and edge counts.
    Stats,
}

fn load_config(cli: &Cli) -> Result<EngineConfig> {
    match &cli.config {
        Some(p) => EngineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(EngineConfig::from_env(&std::env::current_dir()?)?),
    }
}

fn graph_path(cli: &Cli, config: &EngineConfig) -> Option<PathBuf> {
    cli.graph.clone().or_else(|| config.graph_path.clone())
}

fn require_graph_path(cli: &Cli, config: &EngineConfig) -> Result<PathBuf> {
    graph_path(cli, config).context("no graph file: pass --graph or set `graph` in the config")
}

fn open_graph(cli: &Cli, config: &EngineConfig) -> Result<PropertyGraph> {
    Ok(config.open_graph(graph_path(cli, config).as_deref())?)
}

/// Writes through a sibling temp file so a failed write leaves the old
/// graph intact.
fn save_graph(graph: &PropertyGraph, path: &Path) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = std::io::BufWriter::new(
            File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?,
        );
        graph.export(&mut f)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn limits(config: &EngineConfig, args: &LimitArgs) -> Limits {
    Limits {
        max_steps: args.max_steps.unwrap_or(config.limits.max_steps),
        max_repairs_per_step: args.max_repairs.unwrap_or(config.limits.max_repairs_per_step),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::Ingest { path, window, stride } => {
            let target = require_graph_path(&cli, &config)?;
            if let Some(w) = window {
                config.ingest.window = *w;
            }
            if let Some(s) = stride {
                config.ingest.stride = *s;
            }
            let mut graph = open_graph(&cli, &config)?;
            let embedder = config.build_embedder();
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if let Some(profile) = LanguageProfile::for_extension(ext) {
                let source = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let module = path.file_stem().and_then(|s| s.to_str()).unwrap_or("module");
                let ids = ingest_code(&mut graph, module, &source, profile, embedder.as_ref())?;
                println!("code units: {}", ids.len());
            } else {
                let doc = ParsedDocument::load(path)?;
                let image_embedder = config.build_image_embedder(embedder.clone())?;
                let extractor = config.build_extractor()?;
                let providers = Providers {
                    embedder: embedder.as_ref(),
                    image_embedder: image_embedder.as_ref(),
                    extractor: extractor.as_ref(),
                };
                let r = ingest_document(&mut graph, &doc, &providers, &config.ingest)?;
                println!(
                    "chunks: {}\nentities: {}\ntriples: {}\nskipped: {}\ntables: {}\nrows: {}\nimages: {}",
                    r.chunks, r.entities, r.triples, r.skipped, r.tables, r.rows, r.images
                );
            }
            save_graph(&graph, &target)?;
            println!("nodes: {}\nedges: {}", graph.node_count(), graph.edge_count());
        }
        Command::Solve { question, limits: l, out } => {
            let graph = shared(open_graph(&cli, &config)?);
            let engine = config.build_engine(graph)?;
            let task = Task::new(question.clone()).with_limits(limits(&config, l));
            let run = engine.solve(&task)?;
            print!("{}", run.trajectory.render());
            println!("Status: {:?}", run.trajectory.status);
            if let Some(out) = out {
                let f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(out)
                    .with_context(|| format!("opening {}", out.display()))?;
                export_trajectories(std::slice::from_ref(&run.trajectory), f)?;
            }
            if run.trajectory.status != Status::Solved {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Query { query, k, budget } => {
            let graph = open_graph(&cli, &config)?;
            let embedder = config.build_embedder();
            let ctx = retrieve(&graph, query, k.unwrap_or(config.retrieval_k), embedder.as_ref())?;
            let text = assemble_context(&ctx, budget.unwrap_or(config.retrieval_budget));
            if text.is_empty() {
                bail!("no knowledge found for `{query}`");
            }
            println!("{text}");
        }
        Command::Eval { dataset, stages, k, limits: l, out } => {
            let stages = parse_stages(stages)?;
            let graph = shared(open_graph(&cli, &config)?);
            let engine = config.build_engine(graph)?;
            let tools = engine.toolbox.registry().names();
            let file = File::open(dataset).with_context(|| format!("opening {}", dataset.display()))?;
            let records = load_dataset(BufReader::new(file), &tools)?;
            let options = EvalOptions {
                k: k.unwrap_or(config.eval_k),
                limits: limits(&config, l),
                ..EvalOptions::default()
            };
            let report = run_eval(&engine, &records, &stages, &options)?;
            print!("{}", report.render_table());
            if let Some(out) = out {
                std::fs::write(out, report.to_json())
                    .with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Graph { action } => match action {
            GraphAction::Export { out } => {
                let graph = open_graph(&cli, &config)?;
                match out {
                    Some(p) => save_graph(&graph, p)?,
                    None => graph.export(std::io::stdout().lock())?,
                }
            }
            GraphAction::Import { file } => {
                let target = require_graph_path(&cli, &config)?;
                let f = File::open(file).with_context(|| format!("opening {}", file.display()))?;
                let graph = PropertyGraph::import(BufReader::new(f))?;
                save_graph(&graph, &target)?;
                println!("nodes: {}\nedges: {}", graph.node_count(), graph.edge_count());
            }
            GraphAction::Stats => {
                let graph = open_graph(&cli, &config)?;
                println!("dim: {}", graph.dim());
                println!("nodes: {}", graph.node_count());
                for kind in [
                    NodeKind::Chunk,
                    NodeKind::Entity,
                    NodeKind::Table,
                    NodeKind::Row,
                    NodeKind::Image,
                    NodeKind::CodeUnit,
                ] {
                    let n = graph.nodes_of_kind(kind).count();
                    if n > 0 {
                        println!("  {kind}: {n}");
                    }
                }
                println!("edges: {}", graph.edge_count());
                let mut by_label = std::collections::BTreeMap::new();
                for e in graph.edges() {
                    let label = e.label.to_string();
                    let key = label.split(':').next().unwrap_or("").to_string();
                    *by_label.entry(key).or_insert(0usize) += 1;
                }
                for (label, n) in by_label {
                    println!("  {label}: {n}");
                }
                println!("aliases: {}", graph.aliases().len());
            }
        },
        Command::Dedup { cos, lev } => {
            let target = require_graph_path(&cli, &config)?;
            let mut graph = open_graph(&cli, &config)?;
            let r = dedup_entities(
                &mut graph,
                cos.unwrap_or(config.dedup_cos),
                lev.unwrap_or(config.dedup_lev),
            )?;
            if r.groups_merged > 0 {
                save_graph(&graph, &target)?;
            }
            println!("groups merged: {}\nnodes removed: {}", r.groups_merged, r.nodes_removed);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
