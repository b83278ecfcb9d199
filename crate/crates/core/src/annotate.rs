// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Concept-anchored pre-analysis.
//!
//! For every (concept, chunk) and (object, concept) pair an annotator
//! decides whether the subject text says anything about the concept and,
//! if so, returns the relevant statements. Each hit becomes an annotated
//! edge whose summary is specific to that concept: the same chunk is
//! summarised independently for every concept that touches it.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::corpus::{text_files, ChunkNode, CorpusError};
use crate::graph::{edge_id, Edge, EdgeKind, GraphError, TripartiteGraph};
use crate::llmclient::{BackendError, ChatBackend};
use crate::ontology::{Concept, Ontology};
use crate::text::sentence_spans;

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(BackendError),
    #[error("malformed backend reply: {0}")]
    BackendMalformedReply(String),
    #[error("`{0}` has no text to annotate")]
    EmptySubject(String),
    #[error("concept `{0}` is in the ontology but not in the graph")]
    ConceptNotInGraph(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl From<BackendError> for AnnotateError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::MalformedBody(msg) => AnnotateError::BackendMalformedReply(msg),
            other => AnnotateError::BackendUnavailable(other),
        }
    }
}

/// An object of investigation, e.g. a patient record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub object_id: String,
    pub title: String,
    pub text: String,
}

impl ObjectNode {
    /// Builds an object from file contents. A leading `# ` line becomes the
    /// title; otherwise the id is used.
    pub fn from_text(object_id: &str, contents: &str) -> Self {
        let trimmed = contents.trim_start();
        let (title, body) = match trimmed.strip_prefix("# ") {
            Some(rest) => {
                let (first, remainder) = rest.split_once('\n').unwrap_or((rest, ""));
                (first.trim().to_string(), remainder)
            }
            None => (object_id.to_string(), trimmed),
        };
        ObjectNode {
            object_id: object_id.to_string(),
            title,
            text: body.trim().to_string(),
        }
    }
}

/// Reads every `.txt` / `.md` file in `dir` as one object (id = file stem).
pub fn load_objects_dir(dir: &Path) -> Result<Vec<ObjectNode>, AnnotateError> {
    let mut objects = Vec::new();
    for path in text_files(dir)? {
        let contents = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let object = ObjectNode::from_text(id, &contents);
        if object.text.is_empty() {
            return Err(AnnotateError::EmptySubject(id.to_string()));
        }
        objects.push(object);
    }
    Ok(objects)
}

pub trait AnnotatorBackend: Send + Sync {
    /// Concept-specific statements from `subject`, or `None` when the text
    /// holds nothing relevant to `concept`.
    fn extract(&self, concept: &Concept, subject: &str) -> Result<Option<String>, BackendError>;
}

/// Sentences of `text` containing any keyword (case-insensitive), joined by
/// single spaces in original order.
pub fn keyword_extract(keywords: &[String], text: &str) -> Option<String> {
    let needles: Vec<String> = keywords
        .iter()
        .map(|k| k.trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    if needles.is_empty() {
        return None;
    }
    let hits: Vec<&str> = sentence_spans(text)
        .into_iter()
        .map(|r| &text[r])
        .filter(|s| {
            let lower = s.to_lowercase();
            needles.iter().any(|n| lower.contains(n.as_str()))
        })
        .collect();
    if hits.is_empty() {
        None
    } else {
        Some(hits.join(" "))
    }
}

/// Deterministic stand-in for LLM extraction: [`keyword_extract`] over the
/// concept's keywords.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockAnnotator;

impl AnnotatorBackend for MockAnnotator {
    fn extract(&self, concept: &Concept, subject: &str) -> Result<Option<String>, BackendError> {
        Ok(keyword_extract(&concept.keywords, subject))
    }
}

/// Two-message extraction prompt. `{concept_name}`, `{concept_description}`
/// and `{subject}` are substituted into `user`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTemplate {
    pub version: String,
    pub system: String,
    pub user: String,
}

impl Default for AnnotationTemplate {
    fn default() -> Self {
        Self {
            version: "extract-v1".into(),
            system: "You are a careful domain analyst building a knowledge graph. You read a text \
                     and extract only the statements that concern one given concept."
                .into(),
            user: "Extract every statement from the text below that carries information about \
                   the concept. Copy statements verbatim where possible and drop everything \
                   unrelated. If the text contains nothing relevant to the concept, reply with \
                   the single word NONE.\n\n\
                   Concept: {concept_name}\n\
                   Description: {concept_description}\n\
                   Text:\n{subject}"
                .into(),
        }
    }
}

impl AnnotationTemplate {
    pub fn render_user(&self, concept: &Concept, subject: &str) -> String {
        self.user
            .replace("{concept_name}", &concept.name)
            .replace(
                "{concept_description}",
                concept.description.as_deref().unwrap_or("(none)"),
            )
            .replace("{subject}", subject)
    }
}

/// Annotator backed by a chat model.
pub struct LlmAnnotator<C> {
    chat: C,
    template: AnnotationTemplate,
}

impl<C: ChatBackend> LlmAnnotator<C> {
    pub fn new(chat: C, template: AnnotationTemplate) -> Self {
        Self { chat, template }
    }
}

/// Interprets a chat reply: the literal `NONE` means no relevant content.
pub fn interpret_reply(reply: &str) -> Result<Option<String>, BackendError> {
    let trimmed = reply.trim();
    if trimmed.is_empty() {
        return Err(BackendError::MalformedBody("empty reply".into()));
    }
    if trimmed.trim_end_matches('.').eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    Ok(Some(trimmed.to_string()))
}

impl<C: ChatBackend> AnnotatorBackend for LlmAnnotator<C> {
    fn extract(&self, concept: &Concept, subject: &str) -> Result<Option<String>, BackendError> {
        let reply = self
            .chat
            .chat(&self.template.system, &self.template.render_user(concept, subject))?;
        interpret_reply(&reply)
    }
}

pub fn annotate_chunk(
    concept: &Concept,
    chunk: &ChunkNode,
    backend: &dyn AnnotatorBackend,
) -> Result<Option<Edge>, AnnotateError> {
    if chunk.text.trim().is_empty() {
        return Err(AnnotateError::EmptySubject(chunk.chunk_id.clone()));
    }
    Ok(backend
        .extract(concept, &chunk.text)?
        .map(|summary| Edge::annotated(EdgeKind::ConceptChunk, &concept.concept_id, &chunk.chunk_id, summary)))
}

pub fn annotate_object(
    object: &ObjectNode,
    concept: &Concept,
    backend: &dyn AnnotatorBackend,
) -> Result<Option<Edge>, AnnotateError> {
    if object.text.trim().is_empty() {
        return Err(AnnotateError::EmptySubject(object.object_id.clone()));
    }
    Ok(backend
        .extract(concept, &object.text)?
        .map(|summary| Edge::annotated(EdgeKind::ObjectConcept, &object.object_id, &concept.concept_id, summary)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationScope {
    Chunks,
    Objects,
    Both,
}

impl AnnotationScope {
    fn chunks(self) -> bool {
        matches!(self, AnnotationScope::Chunks | AnnotationScope::Both)
    }

    fn objects(self) -> bool {
        matches!(self, AnnotationScope::Objects | AnnotationScope::Both)
    }
}

/// A pair whose annotation failed; serialised one per line for retry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedPair {
    pub kind: EdgeKind,
    pub a: String,
    pub b: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationReport {
    /// Pairs sent to the backend.
    pub pairs_attempted: usize,
    pub edges_created: usize,
    /// Pairs that already had an edge and were not re-annotated.
    pub pairs_skipped: usize,
    /// Pairs where the backend found nothing relevant.
    pub pairs_without_relevance: usize,
    pub pairs_failed: Vec<FailedPair>,
}

impl AnnotationReport {
    /// Failed pairs as JSON lines `{kind, a, b, error}`.
    pub fn failed_pairs_jsonl(&self) -> String {
        self.pairs_failed
            .iter()
            .map(|p| serde_json::to_string(p).expect("failed pair serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotationOptions {
    pub max_in_flight: usize,
    /// After this many pairs failed with an unavailable backend, the
    /// remaining pairs are recorded as failed without being sent. 0 never
    /// gives up.
    pub give_up_after: usize,
}

impl Default for AnnotationOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            give_up_after: 8,
        }
    }
}

/// (kind, source id, target id, outcome) of one annotated pair.
type Resolved = (EdgeKind, String, String, Result<Option<String>, AnnotateError>);

struct Pair<'g> {
    kind: EdgeKind,
    concept: &'g Concept,
    subject_id: &'g str,
    subject: &'g str,
}

/// Applies `f` to every item with at most `workers` concurrent calls;
/// results come back in input order.
pub(crate) fn bounded_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut results: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        local.push((i, f(item)));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("annotation worker panicked"))
            .collect()
    });
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

/// Annotates every missing pair in scope. Existing edges are never touched,
/// so re-running only fills gaps and retries failures.
pub fn run_annotation(
    graph: &mut TripartiteGraph,
    ontology: &Ontology,
    backend: &dyn AnnotatorBackend,
    scope: AnnotationScope,
    options: AnnotationOptions,
) -> Result<AnnotationReport, AnnotateError> {
    let mut concepts = Vec::with_capacity(ontology.concepts.len());
    for concept in ontology.concepts() {
        match graph.concept(&concept.concept_id) {
            Some(c) => concepts.push(c.clone()),
            None => return Err(AnnotateError::ConceptNotInGraph(concept.concept_id.clone())),
        }
    }

    let mut report = AnnotationReport::default();
    let mut pairs = Vec::new();
    if scope.chunks() {
        for concept in &concepts {
            for chunk in graph.chunks() {
                if graph.edge(&edge_id(EdgeKind::ConceptChunk, &concept.concept_id, &chunk.chunk_id)).is_some() {
                    report.pairs_skipped += 1;
                } else {
                    pairs.push(Pair {
                        kind: EdgeKind::ConceptChunk,
                        concept,
                        subject_id: &chunk.chunk_id,
                        subject: &chunk.text,
                    });
                }
            }
        }
    }
    if scope.objects() {
        for object in graph.objects() {
            for concept in &concepts {
                if graph.edge(&edge_id(EdgeKind::ObjectConcept, &object.object_id, &concept.concept_id)).is_some() {
                    report.pairs_skipped += 1;
                } else {
                    pairs.push(Pair {
                        kind: EdgeKind::ObjectConcept,
                        concept,
                        subject_id: &object.object_id,
                        subject: &object.text,
                    });
                }
            }
        }
    }
    report.pairs_attempted = pairs.len();

    let unavailable = AtomicUsize::new(0);
    let outcomes = bounded_map(&pairs, options.max_in_flight, |p| {
        if p.subject.trim().is_empty() {
            return Err(AnnotateError::EmptySubject(p.subject_id.to_string()));
        }
        if options.give_up_after > 0 && unavailable.load(Ordering::Relaxed) >= options.give_up_after {
            return Err(AnnotateError::BackendUnavailable(BackendError::Transport(
                "not sent: backend unavailable for earlier pairs".into(),
            )));
        }
        let outcome = backend.extract(p.concept, p.subject).map_err(AnnotateError::from);
        if matches!(&outcome, Err(AnnotateError::BackendUnavailable(e)) if e.is_retryable()) {
            unavailable.fetch_add(1, Ordering::Relaxed);
        }
        outcome
    });

    // Owned copies so the graph borrow held by `pairs` can end before writing.
    let resolved: Vec<Resolved> = pairs
        .iter()
        .zip(outcomes)
        .map(|(p, outcome)| {
            let (a, b) = match p.kind {
                EdgeKind::ConceptChunk => (p.concept.concept_id.clone(), p.subject_id.to_string()),
                _ => (p.subject_id.to_string(), p.concept.concept_id.clone()),
            };
            (p.kind, a, b, outcome)
        })
        .collect();
    drop(pairs);

    // Single writer: edges are inserted in deterministic pair order.
    for (kind, a, b, outcome) in resolved {
        match outcome {
            Ok(Some(summary)) => {
                graph.insert_edge(Edge::annotated(kind, a, b, summary))?;
                report.edges_created += 1;
            }
            Ok(None) => report.pairs_without_relevance += 1,
            Err(e) => report.pairs_failed.push(FailedPair {
                kind,
                a,
                b,
                error: e.to_string(),
            }),
        }
    }
    Ok(report)
}
