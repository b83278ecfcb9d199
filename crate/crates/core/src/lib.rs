// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Tripartite knowledge graphs for retrieval-augmented prompting.
//!
//! The crate builds a graph with three node populations:
//!
//! - **objects** under investigation (for example a patient record),
//! - **concepts** from a plugged-in ontology,
//! - **text chunks** from a lexical document graph,
//!
//! and connects them with annotated edges that carry concept-specific
//! summaries. Prompt construction is then treated as a binary node
//! classification over a per-object graph of candidate (concept, chunk)
//! pairs, scored against per-concept empirical distributions of embedding
//! similarity.
//!
//! Pipeline stages map onto modules:
//!
//! | stage | module |
//! |-------|--------|
//! | documents → sections → chunks | [`corpus`] |
//! | concept classes and concepts | [`ontology`] |
//! | concept-anchored extraction | [`annotate`] |
//! | typed store and persistence | [`graph`] |
//! | embeddings, scores, distributions | [`scoring`] |
//! | classification graph and thresholds | [`classify`] |
//! | prompt plan and rendering | [`prompt`] |
//! | naive retrieval and density | [`baseline`] |
//! | HTTP / mock / replay backends | [`llmclient`] |
//! | planted synthetic corpora | [`syngen`] |

pub mod annotate;
pub mod baseline;
pub mod classify;
pub mod corpus;
pub mod fixtures;
pub mod graph;
pub mod llmclient;
pub mod ontology;
pub mod pipeline;
pub mod prompt;
pub mod scoring;
pub mod syngen;
mod text;

pub use annotate::{AnnotationReport, AnnotationScope, AnnotatorBackend, ObjectNode};
pub use classify::{ActivatedBy, ClassificationGraph, ClassificationNode, Thresholds};
pub use corpus::{ChunkNode, ChunkingConfig, DocumentNode, SectionNode};
pub use graph::{Edge, EdgeKind, NodeKind, NodeRef, TripartiteGraph};
pub use llmclient::{BackendConfig, BackendError, ChatBackend, EmbedderBackend};
pub use ontology::{Concept, ConceptClass, Ontology};
pub use prompt::{PromptBlock, PromptPlan, QueryTemplate, TokenCounter};
pub use scoring::{ConceptDistribution, ScoreRecord};
