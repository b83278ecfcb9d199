// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs over in-memory inputs: generate, ingest, annotate,
//! embed, score, classify, assemble and compare.

use std::collections::BTreeMap;

use crate::annotate::{run_annotation, AnnotateError, AnnotationOptions, AnnotationReport, AnnotationScope, AnnotatorBackend, ObjectNode};
use crate::baseline::{density_csv, run_comparison, BaselineError, ComparisonInputs, DensityReport};
use crate::classify::Thresholds;
use crate::corpus::{ingest_document, ChunkingConfig, CorpusError};
use crate::graph::{GraphError, TripartiteGraph};
use crate::llmclient::EmbedderBackend;
use crate::ontology::Ontology;
use crate::prompt::{render, HeuristicCounter, QueryTemplate};
use crate::scoring::{build_distributions, embed_chunks, embed_edges, score_all, ConceptDistribution, ScoreRecord, ScoringError};
use crate::syngen::{generate, Gold, PlantPlan, SyngenError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Syngen(#[from] SyngenError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Naive similarity minima used when none are configured.
pub const DEFAULT_NAIVE_MINIMA: [f64; 3] = [0.5, 0.55, 0.6];

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub chunking: ChunkingConfig,
    pub thresholds: Thresholds,
    pub naive_minima: Vec<f64>,
    pub max_in_flight: usize,
    pub template: QueryTemplate,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            chunking: ChunkingConfig::default(),
            thresholds: Thresholds::default(),
            naive_minima: DEFAULT_NAIVE_MINIMA.to_vec(),
            max_in_flight: 4,
            template: QueryTemplate::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub graph: TripartiteGraph,
    pub ontology: Ontology,
    pub gold: Gold,
    pub annotation: AnnotationReport,
    pub records: Vec<ScoreRecord>,
    pub distributions: BTreeMap<String, ConceptDistribution>,
    /// Rendered tripartite prompt per object.
    pub prompts: BTreeMap<String, String>,
    pub reports: Vec<DensityReport>,
}

impl PipelineOutput {
    pub fn density_csv(&self) -> String {
        density_csv(&self.reports)
    }
}

/// Graph with the ontology, every document and every object inserted.
pub fn build_graph(
    ontology: &Ontology,
    documents: &[(String, String)],
    objects: &[(String, String)],
    chunking: &ChunkingConfig,
) -> Result<TripartiteGraph, PipelineError> {
    let mut graph = TripartiteGraph::new();
    graph.plug_ontology(ontology)?;
    for (id, text) in documents {
        graph.add_document(&ingest_document(id, &format!("{id}.txt"), text, chunking)?)?;
    }
    for (id, text) in objects {
        graph.add_object(ObjectNode::from_text(id, text));
    }
    Ok(graph)
}

/// Runs every stage on generated data with the given backends.
pub fn run_pipeline(
    plan: &PlantPlan,
    base_ontology: &Ontology,
    annotator: &dyn AnnotatorBackend,
    embedder: &dyn EmbedderBackend,
    options: &PipelineOptions,
) -> Result<PipelineOutput, PipelineError> {
    let generated = generate(plan, base_ontology)?;
    let ontology = generated.ontology;
    let mut graph = build_graph(&ontology, &generated.documents, &generated.objects, &options.chunking)?;

    let annotation = run_annotation(
        &mut graph,
        &ontology,
        annotator,
        AnnotationScope::Both,
        AnnotationOptions {
            max_in_flight: options.max_in_flight,
            ..AnnotationOptions::default()
        },
    )?;
    embed_edges(&mut graph, embedder, false, options.max_in_flight)?;
    embed_chunks(&mut graph, embedder, false, options.max_in_flight)?;
    let records = score_all(&graph)?;
    let distributions = build_distributions(&records);

    let comparison = run_comparison(&ComparisonInputs {
        graph: &graph,
        ontology: &ontology,
        distributions: &distributions,
        thresholds: &options.thresholds,
        naive_minima: &options.naive_minima,
        embedder,
        gold: &generated.gold,
        template: &options.template,
        counter: &HeuristicCounter,
    })?;
    let prompts = comparison
        .plans
        .iter()
        .map(|(id, plans)| (id.clone(), render(&plans[0])))
        .collect();

    Ok(PipelineOutput {
        graph,
        ontology,
        gold: generated.gold,
        annotation,
        records,
        distributions,
        prompts,
        reports: comparison.reports,
    })
}

/// [`run_pipeline`] with the mock annotator and the mock embedder.
pub fn run_mock_pipeline(plan: &PlantPlan, base_ontology: &Ontology, options: &PipelineOptions) -> Result<PipelineOutput, PipelineError> {
    run_pipeline(
        plan,
        base_ontology,
        &crate::annotate::MockAnnotator,
        &crate::llmclient::MockEmbedder::default(),
        options,
    )
}
