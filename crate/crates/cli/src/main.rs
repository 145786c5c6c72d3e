//! Command-line surface: build the engine state, query it, evaluate against
//! a reference solution, and dump the graph or index for inspection.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use semdr_core::engine::{EngineConfig, EngineState};
use semdr_core::eval::{check_id_alignment, load_queries_csv, load_reference_csv, round1};
use semdr_core::query::join_structured;
use semdr_core::to_canonical_json;

#[derive(Parser)]
#[command(
    name = "semdr",
    about = "Semantic document retrieval over a weighted concept graph",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the engine state from triples and a document corpus.
    Build(BuildArgs),
    /// Run one query against a built state.
    Query(QueryArgs),
    /// Evaluate a query set against a reference solution.
    Eval(EvalArgs),
    /// Dump the weighted concept graph as canonical JSON.
    DumpGraph(StateArg),
    /// Dump the semantic index as sorted `concept,doc_id` CSV.
    DumpIndex(StateArg),
}

#[derive(Args)]
struct BuildArgs {
    /// Triples CSV with header subject,predicate,object.
    #[arg(long)]
    triples: PathBuf,
    /// Directory of .txt / .csv documents (with optional .meta.json sidecars).
    #[arg(long)]
    corpus: PathBuf,
    /// Extra taxonomy CSV with header child,parent.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Geo ontology CSV with header name,level,parent,neighbors.
    #[arg(long)]
    geo: Option<PathBuf>,
    /// Stopword list, one word per line (replaces the built-in list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Directory used only to fit the static clusters.
    #[arg(long)]
    cluster_corpus: Option<PathBuf>,
    /// Semantic score a token needs to anchor a concept.
    #[arg(long, default_value_t = 0.9)]
    anchor_threshold: f64,
    /// Proximity two concepts need to fall into one semantic group.
    #[arg(long, default_value_t = 0.9)]
    group_threshold: f64,
    /// Score a term needs to map a document or cluster to a concept.
    #[arg(long, default_value_t = 0.5)]
    map_threshold: f64,
    /// Number of static clusters (k).
    #[arg(long, default_value_t = 16)]
    clusters: usize,
    /// Clustering seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Where to write the state file.
    #[arg(long, default_value = "semdr-state.json")]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// State file produced by `semdr build`.
    #[arg(long)]
    state: PathBuf,
    /// The search string.
    query: String,
    /// Keep only the first N ranked documents.
    #[arg(long)]
    top: Option<usize>,
    /// Include the solved concept tree in the output.
    #[arg(long)]
    explain: bool,
    /// Join the retrieved structured documents and print the table.
    #[arg(long)]
    join: bool,
    /// Filter by a location from the geo ontology.
    #[arg(long)]
    geo: Option<String>,
    /// Filter by document year tag.
    #[arg(long)]
    year: Option<u16>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// State file produced by `semdr build`.
    #[arg(long)]
    state: PathBuf,
    /// Queries CSV: query_id,query,geo,year,set_label.
    #[arg(long)]
    queries: PathBuf,
    /// Reference CSV: query_id,query,doc_id (one row per relevant doc).
    #[arg(long)]
    reference: PathBuf,
    /// Worker threads for query execution.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Threshold checks like `precision>=80`; a failing check exits nonzero.
    #[arg(long = "assert")]
    assertions: Vec<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StateArg {
    #[arg(long)]
    state: PathBuf,
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Build(args) => {
            let config = EngineConfig {
                triples: args.triples,
                corpus: args.corpus,
                taxonomy: args.taxonomy,
                geo: args.geo,
                stopwords: args.stopwords,
                cluster_corpus: args.cluster_corpus,
                anchor_threshold: args.anchor_threshold,
                group_threshold: args.group_threshold,
                map_threshold: args.map_threshold,
                clusters: args.clusters,
                seed: args.seed,
            };
            let state = EngineState::build(config)?;
            state.save(&args.out)?;
            let summary = state.summary();
            println!(
                "concepts: {} (latent: {})\nrelations: {}\ndocuments: {}\nindex pairs: {}\nstate: {}",
                summary.concepts,
                summary.latent_concepts,
                summary.relations,
                summary.documents,
                summary.index_pairs,
                args.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Query(args) => {
            let state = EngineState::load(&args.state)?;
            let mut result = state.run_query(&args.query, args.geo, args.year)?;
            if let Some(top) = args.top {
                result.docs.truncate(top);
            }
            let mut output = to_canonical_json(&result.to_json(&state.graph, args.explain));
            if args.join {
                let ranked: Vec<_> = result.docs.iter().map(|d| d.id.clone()).collect();
                let joined = join_structured(&ranked, &state.registry, &state.taxonomy)?;
                output.push_str(&joined.to_csv_string());
            }
            emit(&args.out, &output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval(args) => {
            let state = EngineState::load(&args.state)?;
            let queries = load_queries_csv(&args.queries)?;
            let reference = load_reference_csv(&args.reference)?;
            check_id_alignment(&queries, &reference)?;
            let report = state.evaluate(&queries, &reference, args.jobs)?;
            let json = to_canonical_json(&serde_json::to_value(&report)?);
            let mut output = json;
            output.push_str(&report.render_table());
            emit(&args.out, &output)?;
            let mut failed = false;
            for assertion in &args.assertions {
                match report.check_assertion(assertion) {
                    Ok(true) => eprintln!("assert ok: {assertion}"),
                    Ok(false) => {
                        let aggregate = report.semdr.aggregate;
                        eprintln!(
                            "assert FAILED: {assertion} (precision {:.1} recall {:.1} accuracy {:.1} f1 {:.1})",
                            round1(aggregate.precision),
                            round1(aggregate.recall),
                            round1(aggregate.accuracy),
                            round1(aggregate.f1)
                        );
                        failed = true;
                    }
                    Err(reason) => bail!("bad assertion: {reason}"),
                }
            }
            Ok(if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::DumpGraph(args) => {
            let state = EngineState::load(&args.state)?;
            print!("{}", to_canonical_json(&state.dump_graph()));
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpIndex(args) => {
            let state = EngineState::load(&args.state)?;
            print!("{}", state.dump_index());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
