// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Prompt assembly from a classified object.
//!
//! Layout: the query block, then for each concept linked to the object (in
//! ontology declaration order) the object's summary for that concept,
//! followed by the selected concept–chunk summaries of that concept in
//! document order. Every chunk-derived block carries a provenance
//! reference.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classify::{selected_pairs, ClassificationGraph};
use crate::corpus::{document_order, CorpusError};
use crate::graph::{EdgeKind, GraphError, NodeKind, NodeRef, TripartiteGraph};
use crate::ontology::Ontology;

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("object `{0}` has not been classified")]
    UnclassifiedObject(String),
    #[error("concept `{0}` is not part of the ontology")]
    UnknownConcept(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("selected pair ({concept}, {chunk}) has no concept–chunk edge")]
    MissingEdge { concept: String, chunk: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Query,
    ObjectConceptSummary,
    ConceptChunkSummary,
    /// Raw chunk text selected by the naive baseline.
    RetrievedChunk,
}

impl BlockKind {
    pub fn is_evidence(self) -> bool {
        matches!(self, Self::ConceptChunkSummary | Self::RetrievedChunk)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub doc_id: String,
    pub heading: String,
    pub chunk_id: String,
}

impl Provenance {
    pub fn of_chunk(graph: &TripartiteGraph, chunk_id: &str) -> Result<Self, PromptError> {
        let chunk = graph
            .chunk(chunk_id)
            .ok_or_else(|| GraphError::UnknownNode(NodeRef::new(NodeKind::Chunk, chunk_id)))?;
        let heading = graph
            .section(&chunk.section_id)
            .map(|s| s.heading.clone())
            .unwrap_or_default();
        Ok(Self {
            doc_id: chunk.doc_id.clone(),
            heading,
            chunk_id: chunk_id.to_string(),
        })
    }

    pub fn render(&self) -> String {
        format!("[{} > {} > {}]", self.doc_id, self.heading, self.chunk_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBlock {
    pub kind: BlockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_id: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl PromptBlock {
    pub fn render(&self) -> String {
        let concept = self.concept_id.as_deref().unwrap_or("");
        let provenance = self.provenance.as_ref().map(Provenance::render).unwrap_or_default();
        match self.kind {
            BlockKind::Query => self.text.clone(),
            BlockKind::ObjectConceptSummary => format!("Finding: {concept}\n{}", self.text),
            BlockKind::ConceptChunkSummary => format!("Evidence: {concept}\n{provenance}\n{}", self.text),
            BlockKind::RetrievedChunk => format!("Excerpt\n{provenance}\n{}", self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub object_id: String,
    pub blocks: Vec<PromptBlock>,
    pub token_count: usize,
}

impl PromptPlan {
    /// Builds a plan and fills in its token count.
    pub fn new(object_id: impl Into<String>, blocks: Vec<PromptBlock>, counter: &dyn TokenCounter) -> Self {
        let mut plan = Self {
            object_id: object_id.into(),
            blocks,
            token_count: 0,
        };
        plan.token_count = counter.count(&render(&plan));
        plan
    }

    pub fn evidence(&self) -> impl Iterator<Item = &PromptBlock> {
        self.blocks.iter().filter(|b| b.kind.is_evidence())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Blocks separated by one blank line.
pub fn render(plan: &PromptPlan) -> String {
    plan.blocks
        .iter()
        .map(PromptBlock::render)
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub const DEFAULT_QUERY: &str = "Cross-examine every finding listed for {object_title} against the literature excerpts that follow it. \
For each finding, state whether the excerpts support or contradict it and cite the bracketed reference of every excerpt you rely on.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTemplate {
    pub text: String,
}

impl Default for QueryTemplate {
    fn default() -> Self {
        Self {
            text: DEFAULT_QUERY.to_string(),
        }
    }
}

impl QueryTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn render(&self, object_title: &str) -> String {
        self.text.replace("{object_title}", object_title)
    }
}

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(chars / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicCounter;

impl TokenCounter for HeuristicCounter {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }
}

pub fn count_tokens(text: &str, counter: &dyn TokenCounter) -> usize {
    counter.count(text)
}

/// Builds the prompt plan for the object of a classified graph.
pub fn assemble_prompt(
    graph: &TripartiteGraph,
    classification: &ClassificationGraph,
    ontology: &Ontology,
    template: &QueryTemplate,
    counter: &dyn TokenCounter,
) -> Result<PromptPlan, PromptError> {
    let object_id = classification.object_id.as_str();
    if !classification.is_classified() {
        return Err(PromptError::UnclassifiedObject(object_id.to_string()));
    }
    let object = graph
        .object(object_id)
        .ok_or_else(|| PromptError::UnknownObject(object_id.to_string()))?;

    let rank = ontology.declaration_rank();
    let mut concepts = Vec::new();
    for (edge, concept) in graph.neighbors(&NodeRef::new(NodeKind::Object, object_id), EdgeKind::ObjectConcept)? {
        let r = *rank
            .get(concept.id.as_str())
            .ok_or_else(|| PromptError::UnknownConcept(concept.id.clone()))?;
        concepts.push((r, concept.id, edge.summary().to_string()));
    }
    concepts.sort();

    let mut selected: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for pair in selected_pairs(classification) {
        if !rank.contains_key(pair.concept_id.as_str()) {
            return Err(PromptError::UnknownConcept(pair.concept_id));
        }
        selected.entry(pair.concept_id).or_default().insert(pair.chunk_id);
    }

    let mut blocks = vec![PromptBlock {
        kind: BlockKind::Query,
        concept_id: None,
        text: template.render(&object.title),
        provenance: None,
    }];
    for (_, concept_id, summary) in concepts {
        let chunks = selected.remove(&concept_id).unwrap_or_default();
        blocks.push(PromptBlock {
            kind: BlockKind::ObjectConceptSummary,
            concept_id: Some(concept_id.clone()),
            text: summary,
            provenance: None,
        });
        for chunk_id in document_order(graph, &chunks)? {
            let edge = graph
                .edge_between(EdgeKind::ConceptChunk, &concept_id, &chunk_id)
                .ok_or_else(|| PromptError::MissingEdge {
                    concept: concept_id.clone(),
                    chunk: chunk_id.clone(),
                })?;
            blocks.push(PromptBlock {
                kind: BlockKind::ConceptChunkSummary,
                concept_id: Some(concept_id.clone()),
                text: edge.summary().to_string(),
                provenance: Some(Provenance::of_chunk(graph, &chunk_id)?),
            });
        }
    }
    // Selections for concepts the object is not linked to cannot come from
    // build_classification_graph; reject hand-built inconsistencies.
    if let Some((concept, chunks)) = selected.into_iter().next() {
        return Err(PromptError::MissingEdge {
            concept,
            chunk: chunks.into_iter().next().unwrap_or_default(),
        });
    }
    Ok(PromptPlan::new(object_id, blocks, counter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{build_classification_graph, classify, Thresholds};
    use crate::fixtures;
    use crate::ontology::parse_ontology;
    use crate::scoring::{build_distributions, score_all};

    fn plan_for(graph: &TripartiteGraph, ontology: &Ontology, object: &str, th: &Thresholds) -> PromptPlan {
        let dists = build_distributions(&score_all(graph).unwrap());
        let cg = classify(&build_classification_graph(graph, &dists, object).unwrap(), th);
        assemble_prompt(graph, &cg, ontology, &QueryTemplate::default(), &HeuristicCounter).unwrap()
    }

    fn shape(plan: &PromptPlan) -> Vec<(BlockKind, Option<&str>, Option<&str>)> {
        plan.blocks
            .iter()
            .map(|b| {
                (
                    b.kind,
                    b.concept_id.as_deref(),
                    b.provenance.as_ref().map(|p| p.chunk_id.as_str()),
                )
            })
            .collect()
    }

    fn shared_ontology() -> Ontology {
        parse_ontology(
            r#"{"version":"fixture","classes":[{"name":"Cardio","concepts":[
                {"name":"Heart rate"},{"name":"Blood pressure"}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn heuristic_token_counts() {
        assert_eq!(count_tokens("", &HeuristicCounter), 0);
        assert_eq!(count_tokens(&"x".repeat(400), &HeuristicCounter), 100);
        assert_eq!(count_tokens("abcde", &HeuristicCounter), 2);
        assert_eq!(count_tokens("äöü", &HeuristicCounter), 1);
    }

    #[test]
    fn barbara_gets_chunk_two() {
        let g = fixtures::three_patient_graph();
        let ontology = parse_ontology(
            r#"{"version":"fixture","classes":[{"name":"Symptoms","concepts":[{"name":"Blood pressure"}]}]}"#,
        )
        .unwrap();
        let plan = plan_for(&g, &ontology, fixtures::BARBARA, &Thresholds::default());
        assert_eq!(
            shape(&plan),
            vec![
                (BlockKind::Query, None, None),
                (BlockKind::ObjectConceptSummary, Some(fixtures::BLOOD_PRESSURE), None),
                (BlockKind::ConceptChunkSummary, Some(fixtures::BLOOD_PRESSURE), Some(fixtures::CHUNK_II)),
            ]
        );
        assert!(plan.blocks[0].text.contains("Barbara Schmidt"));
        let rendered = render(&plan);
        assert!(rendered.contains("[guideline > Blood pressure management > guideline:s0:c1]"));
        assert_eq!(plan.token_count, HeuristicCounter.count(&rendered));
    }

    #[test]
    fn concepts_follow_declaration_order_and_chunks_document_order() {
        let g = fixtures::shared_chunk_graph();
        let plan = plan_for(&g, &shared_ontology(), fixtures::PATIENT, &Thresholds::default());
        assert_eq!(
            shape(&plan),
            vec![
                (BlockKind::Query, None, None),
                (BlockKind::ObjectConceptSummary, Some(fixtures::HEART_RATE), None),
                (BlockKind::ConceptChunkSummary, Some(fixtures::HEART_RATE), Some("doc:s0:c0")),
                (BlockKind::ConceptChunkSummary, Some(fixtures::HEART_RATE), Some("doc:s0:c1")),
                (BlockKind::ObjectConceptSummary, Some(fixtures::CARDIO_BP), None),
                (BlockKind::ConceptChunkSummary, Some(fixtures::CARDIO_BP), Some("doc:s0:c0")),
            ]
        );
    }

    #[test]
    fn concept_without_selected_chunks_keeps_its_finding() {
        let g = fixtures::three_patient_graph();
        let ontology = parse_ontology(
            r#"{"version":"fixture","classes":[{"name":"Symptoms","concepts":[{"name":"Blood pressure"}]}]}"#,
        )
        .unwrap();
        let plan = plan_for(&g, &ontology, fixtures::PETER, &Thresholds::default());
        assert_eq!(plan.blocks.len(), 2);
        assert_eq!(plan.blocks[1].kind, BlockKind::ObjectConceptSummary);
    }

    #[test]
    fn unclassified_and_unknown_concepts_are_rejected() {
        let g = fixtures::shared_chunk_graph();
        let dists = build_distributions(&score_all(&g).unwrap());
        let cg = build_classification_graph(&g, &dists, fixtures::PATIENT).unwrap();
        assert!(matches!(
            assemble_prompt(&g, &cg, &shared_ontology(), &QueryTemplate::default(), &HeuristicCounter),
            Err(PromptError::UnclassifiedObject(_))
        ));
        let cg = classify(&cg, &Thresholds::default());
        let partial = parse_ontology(r#"{"version":"x","classes":[{"name":"Cardio","concepts":[{"name":"Heart rate"}]}]}"#)
            .unwrap();
        assert!(matches!(
            assemble_prompt(&g, &cg, &partial, &QueryTemplate::default(), &HeuristicCounter),
            Err(PromptError::UnknownConcept(_))
        ));
    }

    #[test]
    fn rendering_is_stable() {
        let g = fixtures::shared_chunk_graph();
        let plan = plan_for(&g, &shared_ontology(), fixtures::PATIENT, &Thresholds::default());
        assert_eq!(render(&plan), render(&plan.clone()));
        let json = plan.to_json();
        let back: PromptPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn query_only_plan_renders_query_text() {
        let plan = PromptPlan::new(
            "o",
            vec![PromptBlock {
                kind: BlockKind::Query,
                concept_id: None,
                text: QueryTemplate::new("Review {object_title}.").render("X"),
                provenance: None,
            }],
            &HeuristicCounter,
        );
        assert_eq!(render(&plan), "Review X.");
    }
}
