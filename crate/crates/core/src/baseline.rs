// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Naive retrieval baseline and information-density measurement.
//!
//! The naive baseline embeds the whole object text and retrieves raw chunks
//! whose embedding clears a similarity minimum. Density is the number of
//! gold concepts whose marker phrase appears in a prompt's evidence blocks,
//! divided by the prompt's token count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classify::{build_classification_graph, classify, ClassifyError, Thresholds};
use crate::graph::TripartiteGraph;
use crate::llmclient::{BackendError, EmbedderBackend};
use crate::ontology::Ontology;
use crate::prompt::{assemble_prompt, BlockKind, PromptBlock, PromptError, PromptPlan, Provenance, QueryTemplate, TokenCounter};
use crate::scoring::{cosine, ConceptDistribution, ScoringError};
use crate::syngen::Gold;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("similarity minimum {0} is outside [-1, 1]")]
    InvalidMinimum(f64),
    #[error("chunk `{0}` has no raw-text embedding")]
    MissingEmbedding(String),
    #[error("no gold concepts for object `{0}`")]
    EmptyGold(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("backend unavailable: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Chunks with `cosine(query, chunk) ≥ min_similarity`, best first, ties
/// by chunk id. Returns (chunk id, similarity).
pub fn naive_rag_scored(
    query_text: &str,
    graph: &TripartiteGraph,
    embedder: &dyn EmbedderBackend,
    min_similarity: f64,
) -> Result<Vec<(String, f64)>, BaselineError> {
    if !(-1.0..=1.0).contains(&min_similarity) {
        return Err(BaselineError::InvalidMinimum(min_similarity));
    }
    let query = embedder.embed(query_text)?;
    let mut hits = Vec::new();
    for chunk in graph.chunks() {
        let v = chunk
            .embedding
            .as_deref()
            .ok_or_else(|| BaselineError::MissingEmbedding(chunk.chunk_id.clone()))?;
        let sim = cosine(&query, v)?;
        if sim >= min_similarity {
            hits.push((chunk.chunk_id.clone(), sim));
        }
    }
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(hits)
}

pub fn naive_rag_select(
    query_text: &str,
    graph: &TripartiteGraph,
    embedder: &dyn EmbedderBackend,
    min_similarity: f64,
) -> Result<Vec<String>, BaselineError> {
    Ok(naive_rag_scored(query_text, graph, embedder, min_similarity)?
        .into_iter()
        .map(|(id, _)| id)
        .collect())
}

/// Query (rendered template followed by the object text) and the retrieved
/// raw chunks in retrieval order.
pub fn naive_prompt(
    graph: &TripartiteGraph,
    object_id: &str,
    chunk_ids: &[String],
    template: &QueryTemplate,
    counter: &dyn TokenCounter,
) -> Result<PromptPlan, BaselineError> {
    let object = graph
        .object(object_id)
        .ok_or_else(|| BaselineError::UnknownObject(object_id.to_string()))?;
    let mut blocks = vec![PromptBlock {
        kind: BlockKind::Query,
        concept_id: None,
        text: format!("{}\n\n{}", template.render(&object.title), object.text),
        provenance: None,
    }];
    for id in chunk_ids {
        let chunk = graph
            .chunk(id)
            .ok_or_else(|| BaselineError::MissingEmbedding(id.clone()))?;
        blocks.push(PromptBlock {
            kind: BlockKind::RetrievedChunk,
            concept_id: None,
            text: chunk.text.clone(),
            provenance: Some(Provenance::of_chunk(graph, id)?),
        });
    }
    Ok(PromptPlan::new(object_id, blocks, counter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tripartite,
    Naive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tripartite => "tripartite",
            Self::Naive => "naive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub method: Method,
    pub object_id: String,
    /// Threshold setting, e.g. `alpha=0.9;beta=0.5` or `min=0.3`.
    pub config: String,
    pub prompt_tokens: usize,
    pub concepts_recovered: usize,
    pub gold_concepts: usize,
    pub density: f64,
}

/// Counts gold markers (case-insensitive) found in the plan's evidence
/// blocks. The object's own text never counts as recovery.
pub fn measure_density(
    method: Method,
    config: &str,
    plan: &PromptPlan,
    gold_markers: &BTreeMap<String, String>,
) -> Result<DensityReport, BaselineError> {
    if gold_markers.is_empty() {
        return Err(BaselineError::EmptyGold(plan.object_id.clone()));
    }
    let evidence: String = plan
        .evidence()
        .map(|b| b.text.to_lowercase())
        .collect::<Vec<_>>()
        .join("\n");
    let recovered = gold_markers
        .values()
        .filter(|m| evidence.contains(m.to_lowercase().as_str()))
        .count();
    Ok(DensityReport {
        method,
        object_id: plan.object_id.clone(),
        config: config.to_string(),
        prompt_tokens: plan.token_count,
        concepts_recovered: recovered,
        gold_concepts: gold_markers.len(),
        density: if plan.token_count == 0 {
            0.0
        } else {
            recovered as f64 / plan.token_count as f64
        },
    })
}

pub struct ComparisonInputs<'a> {
    pub graph: &'a TripartiteGraph,
    pub ontology: &'a Ontology,
    pub distributions: &'a BTreeMap<String, ConceptDistribution>,
    pub thresholds: &'a Thresholds,
    pub naive_minima: &'a [f64],
    pub embedder: &'a dyn EmbedderBackend,
    pub gold: &'a Gold,
    pub template: &'a QueryTemplate,
    pub counter: &'a dyn TokenCounter,
}

pub struct Comparison {
    pub reports: Vec<DensityReport>,
    /// Per object: the tripartite plan followed by one naive plan per minimum.
    pub plans: BTreeMap<String, Vec<PromptPlan>>,
}

pub fn threshold_label(th: &Thresholds) -> String {
    format!("alpha={};beta={}", th.alpha, th.beta)
}

pub fn minimum_label(min: f64) -> String {
    format!("min={min}")
}

/// One tripartite report per gold object followed by one naive report per
/// minimum.
pub fn run_comparison(inputs: &ComparisonInputs<'_>) -> Result<Comparison, BaselineError> {
    let mut reports = Vec::new();
    let mut plans = BTreeMap::new();
    for gold_object in &inputs.gold.objects {
        let object_id = gold_object.object_id.as_str();
        let object = inputs
            .graph
            .object(object_id)
            .ok_or_else(|| BaselineError::UnknownObject(object_id.to_string()))?;
        let markers = inputs.gold.markers_for(object_id);

        let cg = build_classification_graph(inputs.graph, inputs.distributions, object_id)?;
        let cg = classify(&cg, inputs.thresholds);
        let plan = assemble_prompt(inputs.graph, &cg, inputs.ontology, inputs.template, inputs.counter)?;
        reports.push(measure_density(
            Method::Tripartite,
            &threshold_label(inputs.thresholds),
            &plan,
            &markers,
        )?);
        let mut object_plans = vec![plan];

        for &min in inputs.naive_minima {
            let chunks = naive_rag_select(&object.text, inputs.graph, inputs.embedder, min)?;
            let plan = naive_prompt(inputs.graph, object_id, &chunks, inputs.template, inputs.counter)?;
            reports.push(measure_density(Method::Naive, &minimum_label(min), &plan, &markers)?);
            object_plans.push(plan);
        }
        plans.insert(object_id.to_string(), object_plans);
    }
    Ok(Comparison { reports, plans })
}

/// CSV with header `method,object_id,config,prompt_tokens,concepts_recovered,density`.
pub fn density_csv(reports: &[DensityReport]) -> String {
    let mut out = String::from("method,object_id,config,prompt_tokens,concepts_recovered,density\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.8}",
            r.method.as_str(),
            r.object_id,
            r.config,
            r.prompt_tokens,
            r.concepts_recovered,
            r.density
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::llmclient::MockEmbedder;
    use crate::prompt::HeuristicCounter;
    use crate::scoring::embed_chunks;

    fn embedded_fixture() -> (TripartiteGraph, MockEmbedder) {
        let mut g = fixtures::three_patient_graph();
        g.clear_embeddings();
        let e = MockEmbedder::default();
        embed_chunks(&mut g, &e, false, 1).unwrap();
        (g, e)
    }

    fn plan_with(evidence: &[&str], query_chars: usize) -> PromptPlan {
        let mut blocks = vec![PromptBlock {
            kind: BlockKind::Query,
            concept_id: None,
            text: "q".repeat(query_chars),
            provenance: None,
        }];
        for e in evidence {
            blocks.push(PromptBlock {
                kind: BlockKind::RetrievedChunk,
                concept_id: None,
                text: e.to_string(),
                provenance: None,
            });
        }
        PromptPlan::new("o", blocks, &HeuristicCounter)
    }

    #[test]
    fn minimum_bounds() {
        let (g, e) = embedded_fixture();
        assert_eq!(naive_rag_select("blood pressure", &g, &e, -1.0).unwrap().len(), 2);
        assert!(matches!(
            naive_rag_select("blood pressure", &g, &e, 1.01),
            Err(BaselineError::InvalidMinimum(_))
        ));
        let exact = g.chunk(fixtures::CHUNK_I).unwrap().text.clone();
        assert_eq!(naive_rag_select(&exact, &g, &e, 1.0).unwrap(), vec![fixtures::CHUNK_I.to_string()]);
    }

    #[test]
    fn selection_shrinks_with_minimum() {
        let (g, e) = embedded_fixture();
        let q = "home blood pressure values mmHg";
        let mut prev = usize::MAX;
        for min in [-1.0, 0.0, 0.2, 0.5, 0.9] {
            let n = naive_rag_select(q, &g, &e, min).unwrap().len();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn missing_chunk_embedding_is_reported() {
        let g = fixtures::three_patient_graph();
        assert!(matches!(
            naive_rag_select("x", &g, &MockEmbedder::new(3), 0.0),
            Err(BaselineError::MissingEmbedding(_))
        ));
    }

    #[test]
    fn density_counts_markers_in_evidence_only() {
        let markers: BTreeMap<String, String> = [("a".to_string(), "alpha zomu".to_string())].into();
        let plan = plan_with(&["nothing here"], 40);
        let r = measure_density(Method::Naive, "min=0", &plan, &markers).unwrap();
        assert_eq!((r.concepts_recovered, r.density), (0, 0.0));

        let mut hidden = plan.clone();
        hidden.blocks[0].text.push_str(" alpha zomu");
        assert_eq!(measure_density(Method::Naive, "", &hidden, &markers).unwrap().concepts_recovered, 0);

        assert!(matches!(
            measure_density(Method::Naive, "", &plan, &BTreeMap::new()),
            Err(BaselineError::EmptyGold(_))
        ));
    }

    #[test]
    fn eleven_markers_at_4400_tokens() {
        let markers: BTreeMap<String, String> = (0..11).map(|i| (format!("c{i}"), format!("marker{i:02}"))).collect();
        let evidence: Vec<String> = markers.values().cloned().collect();
        let evidence_refs: Vec<&str> = evidence.iter().map(String::as_str).collect();
        // rendered: query + 11 × ("\n\n" + "Excerpt\n" + "\n" + 8 chars)
        let evidence_chars: usize = 11 * (2 + 8 + 1 + 8);
        let plan = plan_with(&evidence_refs, 4400 * 4 - evidence_chars);
        assert_eq!(plan.token_count, 4400);
        let r = measure_density(Method::Tripartite, "", &plan, &markers).unwrap();
        assert_eq!(r.concepts_recovered, 11);
        assert_eq!(r.density, 11.0 / 4400.0);
        assert_eq!(r, measure_density(Method::Tripartite, "", &plan, &markers).unwrap());
    }

    #[test]
    fn doubling_text_halves_density() {
        let markers: BTreeMap<String, String> = [("a".to_string(), "alpha zomu".to_string())].into();
        let short = plan_with(&["alpha zomu"], 400);
        let long = plan_with(&["alpha zomu"], 400 * 2 + "alpha zomu".len() + "\n\nExcerpt\n\n".len());
        let a = measure_density(Method::Naive, "", &short, &markers).unwrap();
        let b = measure_density(Method::Naive, "", &long, &markers).unwrap();
        assert!((a.density / b.density - 2.0).abs() < 0.02);
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let r = DensityReport {
            method: Method::Naive,
            object_id: "o".into(),
            config: "min=0.3".into(),
            prompt_tokens: 10,
            concepts_recovered: 1,
            gold_concepts: 2,
            density: 0.1,
        };
        let csv = density_csv(&[r.clone(), r]);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().nth(1).unwrap(), "naive,o,min=0.3,10,1,0.10000000");
    }
}
