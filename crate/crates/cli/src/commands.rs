// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Value};
use tripartite_core::annotate::{load_objects_dir, run_annotation, AnnotationOptions};
use tripartite_core::baseline::{run_comparison, ComparisonInputs};
use tripartite_core::classify::{build_classification_graph, classify, ClassificationGraph};
use tripartite_core::corpus::{ingest_document, load_corpus_dir, IngestedDocument};
use tripartite_core::fixtures;
use tripartite_core::ontology::{load_ontology, parse_ontology};
use tripartite_core::prompt::{assemble_prompt, render, HeuristicCounter};
use tripartite_core::scoring::{build_distributions, embed_chunks, embed_edges, parse_scores_csv, score_all, scores_csv, ConceptDistribution};
use tripartite_core::syngen::{generate, Gold, PlantPlan};
use tripartite_core::{
    ActivatedBy, AnnotationScope, ObjectNode, Ontology, QueryTemplate, ScoreRecord, Thresholds, TripartiteGraph,
};

use crate::backend::Backends;
use crate::config::PipelineConfig;
use crate::workspace::{fail, write_file, Failure, Workspace};

/// Resolved configuration for one invocation.
pub struct Ctx {
    pub cfg: PipelineConfig,
    pub ws: Workspace,
    /// Use the bundled corpus, objects, ontology and gold wherever no path
    /// is configured.
    pub fixture: bool,
}

/// Machine-readable result plus the lines shown without `--json`.
#[derive(Debug, Default)]
pub struct Outcome {
    pub json: Value,
    pub lines: Vec<String>,
}

type CmdResult = Result<Outcome, Failure>;

fn user_ctx<T, E>(r: Result<T, E>, context: impl FnOnce() -> String) -> Result<T, Failure>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.map_err(|e| Failure::User(anyhow::Error::new(e).context(context())))
}

impl Ctx {
    fn documents(&self) -> Result<Vec<IngestedDocument>, Failure> {
        let chunking = &self.cfg.chunking;
        if let Some(dir) = &self.cfg.corpus_dir {
            return user_ctx(load_corpus_dir(dir, chunking), || format!("ingesting {}", dir.display()));
        }
        if self.fixture {
            return fixtures::CORPUS
                .iter()
                .map(|(stem, text)| user_ctx(ingest_document(stem, &format!("{stem}.txt"), text, chunking), || format!("ingesting {stem}")))
                .collect();
        }
        Err(Failure::user("corpus_dir is not set; pass --corpus-dir, set it in the config file or use --fixture"))
    }

    fn objects(&self) -> Result<Vec<ObjectNode>, Failure> {
        if let Some(dir) = &self.cfg.objects_dir {
            return user_ctx(load_objects_dir(dir), || format!("loading objects from {}", dir.display()));
        }
        if self.fixture {
            return Ok(fixtures::OBJECTS
                .iter()
                .map(|(stem, text)| ObjectNode::from_text(stem, text))
                .collect());
        }
        Ok(Vec::new())
    }

    fn source_ontology(&self) -> Result<Ontology, Failure> {
        if let Some(path) = &self.cfg.ontology_path {
            return user_ctx(load_ontology(path), || format!("loading {}", path.display()));
        }
        if self.fixture {
            return Ok(fixtures::bundled_ontology());
        }
        Err(Failure::user("ontology_path is not set; pass --ontology, set it in the config file or use --fixture"))
    }

    /// The ontology plugged into this workspace.
    fn stored_ontology(&self) -> Result<Ontology, Failure> {
        let path = self.ws.ontology();
        if !path.exists() {
            return Err(Failure::user("ontology missing; run `plug-ontology` first"));
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::User)?;
        user_ctx(parse_ontology(&text), || format!("parsing {}", path.display()))
    }

    fn gold(&self) -> Result<Gold, Failure> {
        if let Some(path) = &self.cfg.gold_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::User)?;
            return user_ctx(serde_json::from_str(&text), || format!("parsing {}", path.display()));
        }
        if self.fixture {
            return Ok(fixtures::bundled_gold(&self.cfg.chunking));
        }
        Err(Failure::user("gold_path is not set; pass --gold, set it in the config file or use --fixture"))
    }

    fn has_gold(&self) -> bool {
        self.fixture || self.cfg.gold_path.is_some()
    }

    fn template(&self) -> Result<QueryTemplate, Failure> {
        match &self.cfg.template_path {
            Some(path) => std::fs::read_to_string(path)
                .map(|t| QueryTemplate::new(t.trim_end()))
                .with_context(|| format!("reading template {}", path.display()))
                .map_err(Failure::User),
            None => Ok(QueryTemplate::default()),
        }
    }

    fn thresholds(&self) -> Result<Thresholds, Failure> {
        let th = self.cfg.thresholds.clone();
        user_ctx(th.validate(), || "thresholds".to_string())?;
        for w in th.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(th)
    }

    fn scores(&self) -> Result<(Vec<ScoreRecord>, BTreeMap<String, ConceptDistribution>), Failure> {
        let path = self.ws.scores();
        if !path.exists() {
            return Err(Failure::user("scores missing; run `score` first"));
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::User)?;
        let records = user_ctx(parse_scores_csv(&text), || format!("parsing {}", path.display()))?;
        let distributions = build_distributions(&records);
        Ok((records, distributions))
    }

    fn object_ids(&self, graph: &TripartiteGraph, object: Option<&str>) -> Result<Vec<String>, Failure> {
        match object {
            Some(id) if graph.object(id).is_none() => Err(Failure::user(format!("unknown object `{id}`"))),
            Some(id) => Ok(vec![id.to_string()]),
            None => Ok(graph.objects().map(|o| o.object_id.clone()).collect()),
        }
    }
}

fn th_label(th: &Thresholds) -> String {
    format!("alpha={} beta={}", th.alpha, th.beta)
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

pub fn cmd_generate(ctx: &Ctx, seed: u64, dir: Option<PathBuf>) -> CmdResult {
    let dir = dir.unwrap_or_else(|| ctx.ws.dir.join("data"));
    let base = match &ctx.cfg.ontology_path {
        Some(_) => ctx.source_ontology()?,
        None => fixtures::bundled_ontology(),
    };
    let plan = PlantPlan {
        seed,
        ..PlantPlan::default()
    };
    let generated = generate(&plan, &base).map_err(|e| Failure::User(e.into()))?;
    generated.write_to(&dir).map_err(|e| Failure::User(e.into()))?;

    let config = PipelineConfig {
        corpus_dir: Some("corpus".into()),
        objects_dir: Some("objects".into()),
        ontology_path: Some("ontology.json".into()),
        gold_path: Some("gold.json".into()),
        ..PipelineConfig::default()
    };
    let config_path = dir.join("pipeline.json");
    write_file(&config_path, &(serde_json::to_string_pretty(&config).expect("config serializes") + "\n"))?;

    Ok(Outcome {
        json: json!({
            "seed": seed,
            "dir": show(&dir),
            "documents": generated.documents.len(),
            "objects": generated.objects.len(),
            "concepts": generated.ontology.concepts.len(),
            "config": show(&config_path),
        }),
        lines: vec![
            format!(
                "generated {} documents and {} objects (seed {seed}) in {}",
                generated.documents.len(),
                generated.objects.len(),
                dir.display()
            ),
            format!("use --config {}", config_path.display()),
        ],
    })
}

pub fn cmd_ingest(ctx: &Ctx) -> CmdResult {
    let documents = ctx.documents()?;
    let objects = ctx.objects()?;
    let mut graph = ctx.ws.load_or_new()?;
    for doc in &documents {
        user_ctx(graph.add_document(doc), || format!("adding document {}", doc.document.doc_id))?;
    }
    for object in &objects {
        graph.add_object(object.clone());
    }
    ctx.ws.save(&graph)?;
    let chunks: usize = documents.iter().map(|d| d.chunks.len()).sum();
    let sections: usize = documents.iter().map(|d| d.sections.len()).sum();
    Ok(Outcome {
        json: json!({
            "documents": documents.len(),
            "sections": sections,
            "chunks": chunks,
            "objects": objects.len(),
            "graph": show(&ctx.ws.graph_path),
        }),
        lines: vec![format!(
            "ingested {} documents ({sections} sections, {chunks} chunks) and {} objects into {}",
            documents.len(),
            objects.len(),
            ctx.ws.graph_path.display()
        )],
    })
}

pub fn cmd_plug_ontology(ctx: &Ctx) -> CmdResult {
    let ontology = ctx.source_ontology()?;
    let mut graph = ctx.ws.load_or_new()?;
    user_ctx(graph.plug_ontology(&ontology), || "plugging ontology".to_string())?;
    ctx.ws.save(&graph)?;
    write_file(&ctx.ws.ontology(), &ontology.to_json())?;
    Ok(Outcome {
        json: json!({
            "version": ontology.version,
            "classes": ontology.classes.len(),
            "concepts": ontology.concepts.len(),
        }),
        lines: vec![format!(
            "plugged ontology {} ({} classes, {} concepts)",
            ontology.version,
            ontology.classes.len(),
            ontology.concepts.len()
        )],
    })
}

pub fn cmd_annotate(ctx: &Ctx, scope: AnnotationScope) -> CmdResult {
    let mut graph = ctx.ws.load()?;
    let ontology = ctx.stored_ontology()?;
    let backends = Backends::from_config(&ctx.cfg)?;
    let report = run_annotation(
        &mut graph,
        &ontology,
        &*backends.annotator,
        scope,
        AnnotationOptions {
            max_in_flight: ctx.cfg.llm.max_in_flight,
            ..AnnotationOptions::default()
        },
    )
    .map_err(fail("annotating"))?;
    // Keep the successful edges even when some pairs failed.
    ctx.ws.save(&graph)?;
    write_file(
        &ctx.ws.annotation_report(),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let failed = ctx.ws.failed_pairs();
    if report.pairs_failed.is_empty() {
        let _ = std::fs::remove_file(&failed);
    } else {
        write_file(&failed, &report.failed_pairs_jsonl())?;
        return Err(Failure::Backend(anyhow::anyhow!(
            "{} of {} pairs failed (first: {}); see {}; re-run `annotate` to retry them",
            report.pairs_failed.len(),
            report.pairs_attempted,
            report.pairs_failed[0].error,
            failed.display()
        )));
    }
    Ok(Outcome {
        lines: vec![format!(
            "annotated {} pairs: {} edges created, {} without relevance, {} already present",
            report.pairs_attempted, report.edges_created, report.pairs_without_relevance, report.pairs_skipped
        )],
        json: serde_json::to_value(&report).expect("report serializes"),
    })
}

pub fn cmd_embed(ctx: &Ctx, force: bool) -> CmdResult {
    let mut graph = ctx.ws.load()?;
    let backends = Backends::from_config(&ctx.cfg)?;
    let n = ctx.cfg.llm.max_in_flight;
    let edges = embed_edges(&mut graph, &*backends.embedder, force, n).map_err(fail("embedding edge summaries"))?;
    let chunks = embed_chunks(&mut graph, &*backends.embedder, force, n).map_err(fail("embedding chunks"))?;
    ctx.ws.save(&graph)?;
    Ok(Outcome {
        json: json!({"edges": edges, "chunks": chunks, "dimension": graph.embedding_dim()}),
        lines: vec![format!("embedded {edges} edge summaries and {chunks} chunks")],
    })
}

pub fn cmd_score(ctx: &Ctx) -> CmdResult {
    let graph = ctx.ws.load()?;
    let records = score_all(&graph).map_err(fail("scoring (run `embed` first)"))?;
    if records.is_empty() {
        return Err(Failure::user(
            "no object-concept-chunk paths to score; run `annotate` and `embed` first",
        ));
    }
    let distributions = build_distributions(&records);
    write_file(&ctx.ws.scores(), &scores_csv(&records, &distributions))?;
    let summaries: Vec<_> = distributions.values().map(|d| d.summary()).collect();
    write_file(
        &ctx.ws.distributions(),
        &serde_json::to_string_pretty(&summaries).expect("summaries serialize"),
    )?;
    let low: Vec<&str> = summaries
        .iter()
        .filter(|s| s.low_sample_confidence)
        .map(|s| s.concept_id.as_str())
        .collect();
    let mut lines = vec![format!(
        "scored {} triples over {} concepts -> {}",
        records.len(),
        distributions.len(),
        ctx.ws.scores().display()
    )];
    if !low.is_empty() {
        lines.push(format!("low-sample distributions: {}", low.join(", ")));
    }
    Ok(Outcome {
        json: json!({"triples": records.len(), "concepts": distributions.len(), "low_sample": low}),
        lines,
    })
}

fn classified(ctx: &Ctx, graph: &TripartiteGraph, object_id: &str, th: &Thresholds, distributions: &BTreeMap<String, ConceptDistribution>) -> Result<ClassificationGraph, Failure> {
    let cg = build_classification_graph(graph, distributions, object_id).map_err(fail("building classification graph"))?;
    let cg = classify(&cg, th);
    write_file(&ctx.ws.classification(object_id), &cg.report().to_json())?;
    Ok(cg)
}

fn count(cg: &ClassificationGraph, by: ActivatedBy) -> usize {
    cg.nodes.iter().filter(|n| n.activated_by == by).count()
}

pub fn cmd_classify(ctx: &Ctx, object: Option<&str>) -> CmdResult {
    let th = ctx.thresholds()?;
    let (_, distributions) = ctx.scores()?;
    let graph = ctx.ws.load()?;
    let mut out = Outcome::default();
    let mut objects = Vec::new();
    for id in ctx.object_ids(&graph, object)? {
        let cg = classified(ctx, &graph, &id, &th, &distributions)?;
        let (a, b) = (count(&cg, ActivatedBy::Alpha), count(&cg, ActivatedBy::Beta));
        out.lines.push(format!(
            "classify {id}: {} nodes={} selected={} (alpha {a}, beta {b}) -> {}",
            th_label(&th),
            cg.nodes.len(),
            a + b,
            ctx.ws.classification(&id).display()
        ));
        objects.push(json!({
            "object_id": id,
            "nodes": cg.nodes.len(),
            "alpha_selected": a,
            "beta_selected": b,
            "interaction_edges": cg.interaction_edges.len(),
            "path": show(&ctx.ws.classification(&id)),
        }));
    }
    out.json = json!({"alpha": th.alpha, "beta": th.beta, "objects": objects});
    Ok(out)
}

pub fn cmd_prompt(ctx: &Ctx, object: Option<&str>) -> CmdResult {
    let th = ctx.thresholds()?;
    let (_, distributions) = ctx.scores()?;
    let graph = ctx.ws.load()?;
    let ontology = ctx.stored_ontology()?;
    let template = ctx.template()?;
    let mut out = Outcome::default();
    let mut objects = Vec::new();
    for id in ctx.object_ids(&graph, object)? {
        let cg = classified(ctx, &graph, &id, &th, &distributions)?;
        let plan = assemble_prompt(&graph, &cg, &ontology, &template, &HeuristicCounter).map_err(fail("assembling prompt"))?;
        write_file(&ctx.ws.prompt(&id), &render(&plan))?;
        write_file(&ctx.ws.plan(&id), &plan.to_json())?;
        out.lines.push(format!(
            "prompt {id}: {} blocks={} tokens={} -> {}",
            th_label(&th),
            plan.blocks.len(),
            plan.token_count,
            ctx.ws.prompt(&id).display()
        ));
        objects.push(json!({
            "object_id": id,
            "blocks": plan.blocks.len(),
            "evidence_blocks": plan.evidence().count(),
            "token_count": plan.token_count,
            "path": show(&ctx.ws.prompt(&id)),
            "plan": show(&ctx.ws.plan(&id)),
        }));
    }
    out.json = json!({"alpha": th.alpha, "beta": th.beta, "objects": objects});
    Ok(out)
}

pub fn cmd_compare(ctx: &Ctx) -> CmdResult {
    let th = ctx.thresholds()?;
    let (_, distributions) = ctx.scores()?;
    let graph = ctx.ws.load()?;
    let ontology = ctx.stored_ontology()?;
    let template = ctx.template()?;
    let gold = ctx.gold()?;
    let backends = Backends::from_config(&ctx.cfg)?;
    let comparison = run_comparison(&ComparisonInputs {
        graph: &graph,
        ontology: &ontology,
        distributions: &distributions,
        thresholds: &th,
        naive_minima: &ctx.cfg.naive_minima,
        embedder: &*backends.embedder,
        gold: &gold,
        template: &template,
        counter: &HeuristicCounter,
    })
    .map_err(fail("comparing against naive retrieval"))?;
    let csv = tripartite_core::baseline::density_csv(&comparison.reports);
    write_file(&ctx.ws.density(), &csv)?;
    let mut lines = vec![format!("{:<11} {:<16} {:<22} {:>7} {:>9} {:>10}", "method", "object", "config", "tokens", "recovered", "density")];
    for r in &comparison.reports {
        lines.push(format!(
            "{:<11} {:<16} {:<22} {:>7} {:>6}/{:<2} {:>10.6}",
            r.method.as_str(),
            r.object_id,
            r.config,
            r.prompt_tokens,
            r.concepts_recovered,
            r.gold_concepts,
            r.density
        ));
    }
    lines.push(format!("-> {}", ctx.ws.density().display()));
    Ok(Outcome {
        json: json!({"reports": comparison.reports, "path": show(&ctx.ws.density())}),
        lines,
    })
}

pub fn cmd_stats(ctx: &Ctx) -> CmdResult {
    let graph = ctx.ws.load()?;
    let nodes: BTreeMap<&str, usize> = graph.node_counts().into_iter().map(|(k, v)| (k.as_str(), v)).collect();
    let edges: BTreeMap<&str, usize> = graph.edge_counts().into_iter().map(|(k, v)| (k.as_str(), v)).collect();
    let unembedded = graph
        .edges()
        .filter(|e| e.kind.is_annotated() && e.embedding.is_none())
        .count();
    let problems = graph.validate();
    let mut lines = vec![
        format!("graph {}", ctx.ws.graph_path.display()),
        format!("nodes: {}", fmt_counts(&nodes)),
        format!("edges: {}", fmt_counts(&edges)),
        format!(
            "embedding dimension: {}",
            graph.embedding_dim().map_or("none".to_string(), |d| d.to_string())
        ),
        format!("annotated edges without embedding: {unembedded}"),
    ];
    let mut json = json!({
        "nodes": nodes,
        "edges": edges,
        "embedding_dim": graph.embedding_dim(),
        "unembedded_edges": unembedded,
        "problems": problems,
    });
    if ctx.ws.scores().exists() {
        let (records, distributions) = ctx.scores()?;
        lines.push(format!("scores: {} triples over {} concepts", records.len(), distributions.len()));
        json["scores"] = json!(records.len());
        json["distributions"] = json!(distributions.values().map(|d| d.summary()).collect::<Vec<_>>());
    }
    lines.extend(problems.iter().map(|p| format!("problem: {p}")));
    Ok(Outcome { json, lines })
}

fn fmt_counts(counts: &BTreeMap<&str, usize>) -> String {
    if counts.is_empty() {
        return "none".into();
    }
    counts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Every stage in order on the configured inputs.
pub fn cmd_run(ctx: &Ctx) -> CmdResult {
    let mut stages = vec![
        ("ingest", cmd_ingest(ctx)?),
        ("plug_ontology", cmd_plug_ontology(ctx)?),
        ("annotate", cmd_annotate(ctx, AnnotationScope::Both)?),
        ("embed", cmd_embed(ctx, false)?),
        ("score", cmd_score(ctx)?),
        ("prompt", cmd_prompt(ctx, None)?),
    ];
    if ctx.has_gold() {
        stages.push(("compare", cmd_compare(ctx)?));
    }
    let mut out = Outcome::default();
    let mut json = serde_json::Map::new();
    for (name, o) in stages {
        out.lines.extend(o.lines);
        json.insert(name.to_string(), o.json);
    }
    out.json = Value::Object(json);
    Ok(out)
}

