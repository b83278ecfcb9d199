// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! `tripartite`: build a tripartite graph, score and classify candidate
//! evidence, and assemble prompts.

mod backend;
mod commands;
mod config;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tripartite_core::AnnotationScope;

use crate::commands::{Ctx, Outcome};
use crate::config::{Overrides, PipelineConfig};
use crate::workspace::{Failure, WriteLock, Workspace};

#[derive(Debug, Parser)]
#[command(name = "tripartite", version, about = "Tripartite graph retrieval and prompt assembly")]
struct Cli {
    /// JSON pipeline config. Flags and environment variables override it.
    #[arg(long, global = true, env = "TRIPARTITE_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory holding the graph and every artifact.
    #[arg(long, global = true, env = "TRIPARTITE_OUT", default_value = "tripartite-out")]
    out: PathBuf,
    /// Print one JSON document to stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Use the bundled corpus, objects, ontology and gold where no path is set.
    #[arg(long, global = true)]
    fixture: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scope {
    Chunks,
    Objects,
    Both,
}

impl From<Scope> for AnnotationScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Chunks => AnnotationScope::Chunks,
            Scope::Objects => AnnotationScope::Objects,
            Scope::Both => AnnotationScope::Both,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus with planted findings and its gold file.
    Generate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Target directory (default: <out>/data).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Add the corpus documents and the objects to the graph.
    Ingest,
    /// Add the ontology's classes and concepts to the graph.
    PlugOntology,
    /// Create concept-specific summary edges for missing pairs.
    Annotate {
        #[arg(long, value_enum, default_value = "both")]
        scope: Scope,
    },
    /// Embed edge summaries and chunk text.
    Embed {
        /// Re-embed items that already have a vector.
        #[arg(long)]
        force: bool,
    },
    /// Score every object-concept-chunk path and build distributions.
    Score,
    /// Classify candidate (concept, chunk) pairs of one or all objects.
    Classify {
        #[arg(long)]
        object: Option<String>,
    },
    /// Assemble and render the prompt of one or all objects.
    Prompt {
        #[arg(long)]
        object: Option<String>,
    },
    /// Compare prompt density against naive retrieval.
    Compare,
    /// Summarise the graph and the score distributions.
    Stats,
    /// Run ingest through compare in one go.
    Run,
}

impl Command {
    fn writes(&self) -> bool {
        !matches!(self, Command::Stats | Command::Generate { .. })
    }
}

fn resolve(cli: &Cli) -> Result<Ctx, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&cli.overrides);
    cfg.validate()?;
    let ws = Workspace::new(cli.out.clone(), cfg.graph_path.clone());
    Ok(Ctx {
        cfg,
        ws,
        fixture: cli.fixture,
    })
}

fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    let ctx = resolve(cli)?;
    let _lock = if cli.command.writes() {
        Some(WriteLock::acquire(&ctx.ws.dir)?)
    } else {
        None
    };
    match &cli.command {
        Command::Generate { seed, dir } => commands::cmd_generate(&ctx, *seed, dir.clone()),
        Command::Ingest => commands::cmd_ingest(&ctx),
        Command::PlugOntology => commands::cmd_plug_ontology(&ctx),
        Command::Annotate { scope } => commands::cmd_annotate(&ctx, (*scope).into()),
        Command::Embed { force } => commands::cmd_embed(&ctx, *force),
        Command::Score => commands::cmd_score(&ctx),
        Command::Classify { object } => commands::cmd_classify(&ctx, object.as_deref()),
        Command::Prompt { object } => commands::cmd_prompt(&ctx, object.as_deref()),
        Command::Compare => commands::cmd_compare(&ctx),
        Command::Stats => commands::cmd_stats(&ctx),
        Command::Run => commands::cmd_run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&outcome.json).expect("json output"));
            } else {
                for line in outcome.lines {
                    println!("{line}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            let message = format!("{:#}", failure.error());
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({"error": message, "exit_code": failure.exit_code()}))
                        .expect("json output")
                );
            }
            eprintln!("error: {message}");
            ExitCode::from(failure.exit_code())
        }
    }
}
