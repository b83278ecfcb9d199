// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! In-memory tripartite property graph with JSON-lines persistence.
//!
//! Nodes are partitioned by [`NodeKind`]; identifiers only need to be unique
//! within a kind. Edges are typed by [`EdgeKind`], which fixes the kinds of
//! both endpoints. Object and chunk nodes are never adjacent: the only
//! paths between them run through concepts. Structure edges (document
//! hierarchy, chunk successor links, class membership) are the permitted
//! exceptions to strict tripartiteness.
//!
//! File layout: one JSON object per line, `{"t": <kind>, ...fields}`. The
//! first line is `{"t":"header","format":1,"embedding_dim":N}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::ObjectNode;
use crate::corpus::{ChunkNode, DocumentNode, IngestedDocument, SectionNode};
use crate::ontology::{Concept, ConceptClass, Ontology};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("edge `{edge}`: endpoint {endpoint} does not exist")]
    EndpointMissing { edge: String, endpoint: NodeRef },
    #[error("edge `{edge}`: expected {expected} endpoint, `{id}` is a {found}")]
    KindMismatch {
        edge: String,
        id: String,
        expected: NodeKind,
        found: NodeKind,
    },
    #[error("edge `{edge}`: {reason}")]
    InvalidEdge { edge: String, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeRef),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("embedding dimension {found} does not match graph dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding contains non-finite values")]
    InvalidEmbedding,
    #[error("graph file format {found} is not supported (expected {FORMAT_VERSION})")]
    FormatVersionMismatch { found: u32 },
    #[error("corrupt graph record on line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
    #[error("graph file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Object,
    ConceptClass,
    Concept,
    Document,
    Section,
    Chunk,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Object,
        NodeKind::ConceptClass,
        NodeKind::Concept,
        NodeKind::Document,
        NodeKind::Section,
        NodeKind::Chunk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Object => "object",
            NodeKind::ConceptClass => "concept_class",
            NodeKind::Concept => "concept",
            NodeKind::Document => "document",
            NodeKind::Section => "section",
            NodeKind::Chunk => "chunk",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    ObjectConcept,
    ConceptChunk,
    ClassConcept,
    DocSection,
    SectionChunk,
    ChunkNext,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::ObjectConcept,
        EdgeKind::ConceptChunk,
        EdgeKind::ClassConcept,
        EdgeKind::DocSection,
        EdgeKind::SectionChunk,
        EdgeKind::ChunkNext,
    ];

    /// (source kind, target kind)
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::ObjectConcept => (NodeKind::Object, NodeKind::Concept),
            EdgeKind::ConceptChunk => (NodeKind::Concept, NodeKind::Chunk),
            EdgeKind::ClassConcept => (NodeKind::ConceptClass, NodeKind::Concept),
            EdgeKind::DocSection => (NodeKind::Document, NodeKind::Section),
            EdgeKind::SectionChunk => (NodeKind::Section, NodeKind::Chunk),
            EdgeKind::ChunkNext => (NodeKind::Chunk, NodeKind::Chunk),
        }
    }

    /// Annotated edges carry an extracted summary and, later, its embedding.
    pub fn is_annotated(self) -> bool {
        matches!(self, EdgeKind::ObjectConcept | EdgeKind::ConceptChunk)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::ObjectConcept => "object_concept",
            EdgeKind::ConceptChunk => "concept_chunk",
            EdgeKind::ClassConcept => "class_concept",
            EdgeKind::DocSection => "doc_section",
            EdgeKind::SectionChunk => "section_chunk",
            EdgeKind::ChunkNext => "chunk_next",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub id: String,
}

impl NodeRef {
    pub fn new(kind: NodeKind, id: impl Into<String>) -> Self {
        Self {
            kind,
            id: id.into(),
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:`{}`", self.kind, self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Object(ObjectNode),
    ConceptClass(ConceptClass),
    Concept(Concept),
    Document(DocumentNode),
    Section(SectionNode),
    Chunk(ChunkNode),
}

impl Node {
    pub fn node_ref(&self) -> NodeRef {
        match self {
            Node::Object(n) => NodeRef::new(NodeKind::Object, &n.object_id),
            Node::ConceptClass(n) => NodeRef::new(NodeKind::ConceptClass, &n.class_id),
            Node::Concept(n) => NodeRef::new(NodeKind::Concept, &n.concept_id),
            Node::Document(n) => NodeRef::new(NodeKind::Document, &n.doc_id),
            Node::Section(n) => NodeRef::new(NodeKind::Section, &n.section_id),
            Node::Chunk(n) => NodeRef::new(NodeKind::Chunk, &n.chunk_id),
        }
    }
}

/// A typed edge. Annotated kinds carry a non-empty `summary`; structure
/// kinds carry neither summary nor embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl Edge {
    pub fn annotated(
        kind: EdgeKind,
        source: impl Into<String>,
        target: impl Into<String>,
        summary: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            source: source.into(),
            target: target.into(),
            summary: Some(summary.into()),
            embedding: None,
        }
    }

    pub fn structural(kind: EdgeKind, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            kind,
            source: source.into(),
            target: target.into(),
            summary: None,
            embedding: None,
        }
    }

    pub fn id(&self) -> String {
        edge_id(self.kind, &self.source, &self.target)
    }

    pub fn source_ref(&self) -> NodeRef {
        NodeRef::new(self.kind.endpoints().0, &self.source)
    }

    pub fn target_ref(&self) -> NodeRef {
        NodeRef::new(self.kind.endpoints().1, &self.target)
    }

    pub fn summary(&self) -> &str {
        self.summary.as_deref().unwrap_or_default()
    }
}

/// Deterministic edge identifier; at most one edge exists per id.
pub fn edge_id(kind: EdgeKind, source: &str, target: &str) -> String {
    format!("{kind}:{source}->{target}")
}

#[derive(Debug, Clone, Default)]
pub struct TripartiteGraph {
    embedding_dim: Option<usize>,
    objects: BTreeMap<String, ObjectNode>,
    classes: BTreeMap<String, ConceptClass>,
    concepts: BTreeMap<String, Concept>,
    documents: BTreeMap<String, DocumentNode>,
    sections: BTreeMap<String, SectionNode>,
    chunks: BTreeMap<String, ChunkNode>,
    edges: BTreeMap<String, Edge>,
    // Derived: edge ids incident to each node.
    incident: BTreeMap<NodeRef, BTreeSet<String>>,
}

/// Structural equality: same nodes, same edges (with summaries and
/// embeddings), same embedding dimension. Insertion order is irrelevant.
impl PartialEq for TripartiteGraph {
    fn eq(&self, other: &Self) -> bool {
        self.embedding_dim == other.embedding_dim
            && self.objects == other.objects
            && self.classes == other.classes
            && self.concepts == other.concepts
            && self.documents == other.documents
            && self.sections == other.sections
            && self.chunks == other.chunks
            && self.edges == other.edges
    }
}

impl TripartiteGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    pub fn contains(&self, node: &NodeRef) -> bool {
        self.kind_of_id(node.kind, &node.id)
    }

    fn kind_of_id(&self, kind: NodeKind, id: &str) -> bool {
        match kind {
            NodeKind::Object => self.objects.contains_key(id),
            NodeKind::ConceptClass => self.classes.contains_key(id),
            NodeKind::Concept => self.concepts.contains_key(id),
            NodeKind::Document => self.documents.contains_key(id),
            NodeKind::Section => self.sections.contains_key(id),
            NodeKind::Chunk => self.chunks.contains_key(id),
        }
    }

    /// Inserts or replaces a node by (kind, id).
    pub fn upsert_node(&mut self, node: Node) -> NodeRef {
        let node_ref = node.node_ref();
        match node {
            Node::Object(n) => {
                self.objects.insert(n.object_id.clone(), n);
            }
            Node::ConceptClass(n) => {
                self.classes.insert(n.class_id.clone(), n);
            }
            Node::Concept(n) => {
                self.concepts.insert(n.concept_id.clone(), n);
            }
            Node::Document(n) => {
                self.documents.insert(n.doc_id.clone(), n);
            }
            Node::Section(n) => {
                self.sections.insert(n.section_id.clone(), n);
            }
            Node::Chunk(n) => {
                self.chunks.insert(n.chunk_id.clone(), n);
            }
        }
        node_ref
    }

    fn check_endpoint(&self, edge: &str, expected: NodeKind, id: &str) -> Result<(), GraphError> {
        if self.kind_of_id(expected, id) {
            return Ok(());
        }
        match NodeKind::ALL.into_iter().find(|&k| self.kind_of_id(k, id)) {
            Some(found) => Err(GraphError::KindMismatch {
                edge: edge.to_string(),
                id: id.to_string(),
                expected,
                found,
            }),
            None => Err(GraphError::EndpointMissing {
                edge: edge.to_string(),
                endpoint: NodeRef::new(expected, id),
            }),
        }
    }

    fn check_embedding(&self, embedding: &[f64]) -> Result<(), GraphError> {
        if embedding.iter().any(|x| !x.is_finite()) {
            return Err(GraphError::InvalidEmbedding);
        }
        match self.embedding_dim {
            Some(d) if d != embedding.len() => Err(GraphError::DimensionMismatch {
                expected: d,
                found: embedding.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Inserts an edge. Inserting an edge whose id already exists is a no-op
    /// that returns the existing id.
    pub fn insert_edge(&mut self, edge: Edge) -> Result<String, GraphError> {
        let id = edge.id();
        let (source_kind, target_kind) = edge.kind.endpoints();
        self.check_endpoint(&id, source_kind, &edge.source)?;
        self.check_endpoint(&id, target_kind, &edge.target)?;

        if edge.kind.is_annotated() {
            if edge.summary().trim().is_empty() {
                return Err(GraphError::InvalidEdge {
                    edge: id,
                    reason: "annotated edge needs a non-empty summary".into(),
                });
            }
        } else if edge.summary.is_some() || edge.embedding.is_some() {
            return Err(GraphError::InvalidEdge {
                edge: id,
                reason: "structure edges carry no summary or embedding".into(),
            });
        }
        if edge.kind == EdgeKind::ChunkNext && edge.source == edge.target {
            return Err(GraphError::InvalidEdge {
                edge: id,
                reason: "chunk cannot succeed itself".into(),
            });
        }

        if self.edges.contains_key(&id) {
            return Ok(id);
        }
        if let Some(embedding) = &edge.embedding {
            self.check_embedding(embedding)?;
            self.embedding_dim = Some(embedding.len());
        }
        self.incident
            .entry(edge.source_ref())
            .or_default()
            .insert(id.clone());
        self.incident
            .entry(edge.target_ref())
            .or_default()
            .insert(id.clone());
        self.edges.insert(id.clone(), edge);
        Ok(id)
    }

    pub fn set_edge_embedding(&mut self, edge_id: &str, embedding: Vec<f64>) -> Result<(), GraphError> {
        self.check_embedding(&embedding)?;
        let edge = self
            .edges
            .get_mut(edge_id)
            .ok_or_else(|| GraphError::UnknownEdge(edge_id.to_string()))?;
        if !edge.kind.is_annotated() {
            return Err(GraphError::InvalidEdge {
                edge: edge_id.to_string(),
                reason: "only annotated edges carry embeddings".into(),
            });
        }
        self.embedding_dim = Some(embedding.len());
        edge.embedding = Some(embedding);
        Ok(())
    }

    pub fn set_chunk_embedding(&mut self, chunk_id: &str, embedding: Vec<f64>) -> Result<(), GraphError> {
        self.check_embedding(&embedding)?;
        let chunk = self
            .chunks
            .get_mut(chunk_id)
            .ok_or_else(|| GraphError::UnknownNode(NodeRef::new(NodeKind::Chunk, chunk_id)))?;
        self.embedding_dim = Some(embedding.len());
        chunk.embedding = Some(embedding);
        Ok(())
    }

    /// Drops every stored embedding so the graph can be re-embedded with a
    /// backend of a different dimension.
    pub fn clear_embeddings(&mut self) {
        for edge in self.edges.values_mut() {
            edge.embedding = None;
        }
        for chunk in self.chunks.values_mut() {
            chunk.embedding = None;
        }
        self.embedding_dim = None;
    }

    /// Adds an ingested document with its structure edges.
    pub fn add_document(&mut self, doc: &IngestedDocument) -> Result<(), GraphError> {
        let doc_id = doc.document.doc_id.clone();
        self.upsert_node(Node::Document(doc.document.clone()));
        for section in &doc.sections {
            self.upsert_node(Node::Section(section.clone()));
        }
        for chunk in &doc.chunks {
            let mut chunk = chunk.clone();
            // Re-ingesting unchanged text keeps the stored embedding.
            if let Some(old) = self.chunks.get(&chunk.chunk_id) {
                if old.text == chunk.text && chunk.embedding.is_none() {
                    chunk.embedding = old.embedding.clone();
                }
            }
            self.upsert_node(Node::Chunk(chunk));
        }
        for section in &doc.sections {
            self.insert_edge(Edge::structural(EdgeKind::DocSection, &doc_id, &section.section_id))?;
            for chunk_id in &section.chunk_ids {
                self.insert_edge(Edge::structural(EdgeKind::SectionChunk, &section.section_id, chunk_id))?;
            }
        }
        for chunk in &doc.chunks {
            if let Some(next) = &chunk.next_chunk_id {
                self.insert_edge(Edge::structural(EdgeKind::ChunkNext, &chunk.chunk_id, next))?;
            }
        }
        Ok(())
    }

    /// Adds all classes and concepts of an ontology with membership edges.
    pub fn plug_ontology(&mut self, ontology: &Ontology) -> Result<(), GraphError> {
        for class in &ontology.classes {
            self.upsert_node(Node::ConceptClass(class.clone()));
        }
        for concept in &ontology.concepts {
            self.upsert_node(Node::Concept(concept.clone()));
        }
        for class in &ontology.classes {
            for concept_id in &class.concept_ids {
                self.insert_edge(Edge::structural(EdgeKind::ClassConcept, &class.class_id, concept_id))?;
            }
        }
        Ok(())
    }

    pub fn add_object(&mut self, object: ObjectNode) -> NodeRef {
        self.upsert_node(Node::Object(object))
    }

    pub fn object(&self, id: &str) -> Option<&ObjectNode> {
        self.objects.get(id)
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn concept_class(&self, id: &str) -> Option<&ConceptClass> {
        self.classes.get(id)
    }

    pub fn document(&self, id: &str) -> Option<&DocumentNode> {
        self.documents.get(id)
    }

    pub fn section(&self, id: &str) -> Option<&SectionNode> {
        self.sections.get(id)
    }

    pub fn chunk(&self, id: &str) -> Option<&ChunkNode> {
        self.chunks.get(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectNode> {
        self.objects.values()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocumentNode> {
        self.documents.values()
    }

    pub fn sections(&self) -> impl Iterator<Item = &SectionNode> {
        self.sections.values()
    }

    pub fn chunks(&self) -> impl Iterator<Item = &ChunkNode> {
        self.chunks.values()
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn edge_between(&self, kind: EdgeKind, source: &str, target: &str) -> Option<&Edge> {
        self.edges.get(&edge_id(kind, source, target))
    }

    /// All edges, ordered by edge id.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.values().filter(move |e| e.kind == kind)
    }

    /// Neighbours of `node` over edges of `kind`, in either direction,
    /// ordered by neighbour id.
    pub fn neighbors(&self, node: &NodeRef, kind: EdgeKind) -> Result<Vec<(&Edge, NodeRef)>, GraphError> {
        if !self.contains(node) {
            return Err(GraphError::UnknownNode(node.clone()));
        }
        let mut out: Vec<(&Edge, NodeRef)> = self
            .incident
            .get(node)
            .into_iter()
            .flatten()
            .filter_map(|id| self.edges.get(id))
            .filter(|e| e.kind == kind)
            .map(|e| {
                let other = if e.source_ref() == *node {
                    e.target_ref()
                } else {
                    e.source_ref()
                };
                (e, other)
            })
            .collect();
        out.sort_by(|a, b| a.1.id.cmp(&b.1.id).then_with(|| a.0.source.cmp(&b.0.source)));
        Ok(out)
    }

    /// Chunks of `doc_id` in successor-chain order, starting from the
    /// first chunk of the first non-empty section.
    pub fn chain(&self, doc_id: &str) -> std::vec::IntoIter<&ChunkNode> {
        let head = self.documents.get(doc_id).and_then(|doc| {
            doc.section_ids
                .iter()
                .filter_map(|s| self.sections.get(s))
                .find_map(|s| s.chunk_ids.first())
        });
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cursor = head.and_then(|id| self.chunks.get(id));
        while let Some(chunk) = cursor {
            if chunk.doc_id != doc_id || !seen.insert(chunk.chunk_id.as_str()) {
                break;
            }
            out.push(chunk);
            cursor = chunk.next_chunk_id.as_ref().and_then(|id| self.chunks.get(id));
        }
        out.into_iter()
    }

    pub fn node_counts(&self) -> BTreeMap<NodeKind, usize> {
        BTreeMap::from([
            (NodeKind::Object, self.objects.len()),
            (NodeKind::ConceptClass, self.classes.len()),
            (NodeKind::Concept, self.concepts.len()),
            (NodeKind::Document, self.documents.len()),
            (NodeKind::Section, self.sections.len()),
            (NodeKind::Chunk, self.chunks.len()),
        ])
    }

    pub fn node_count(&self) -> usize {
        self.node_counts().values().sum()
    }

    pub fn edge_counts(&self) -> BTreeMap<EdgeKind, usize> {
        let mut counts: BTreeMap<EdgeKind, usize> = EdgeKind::ALL.iter().map(|&k| (k, 0)).collect();
        for edge in self.edges.values() {
            *counts.entry(edge.kind).or_default() += 1;
        }
        counts
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Full schema sweep. Returns human-readable violations; empty means the
    /// graph is well-formed.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (id, edge) in &self.edges {
            if *id != edge.id() {
                problems.push(format!("edge stored under `{id}` has id `{}`", edge.id()));
            }
            let (sk, tk) = edge.kind.endpoints();
            if let Err(e) = self.check_endpoint(id, sk, &edge.source) {
                problems.push(e.to_string());
            }
            if let Err(e) = self.check_endpoint(id, tk, &edge.target) {
                problems.push(e.to_string());
            }
            if edge.kind.is_annotated() && edge.summary().trim().is_empty() {
                problems.push(format!("edge `{id}` has an empty summary"));
            }
            if let (Some(d), Some(v)) = (self.embedding_dim, &edge.embedding) {
                if v.len() != d {
                    problems.push(format!("edge `{id}` embedding has dimension {}", v.len()));
                }
            }
        }
        for section in self.sections.values() {
            for cid in &section.chunk_ids {
                if !self.chunks.contains_key(cid) {
                    problems.push(format!("section `{}` lists missing chunk `{cid}`", section.section_id));
                }
            }
        }
        for doc in self.documents.values() {
            let expected: usize = doc
                .section_ids
                .iter()
                .filter_map(|s| self.sections.get(s))
                .map(|s| s.chunk_ids.len())
                .sum();
            let walked = self.chain(&doc.doc_id).len();
            if walked != expected {
                problems.push(format!(
                    "document `{}` chain visits {walked} of {expected} chunks",
                    doc.doc_id
                ));
            }
        }
        problems
    }

    /// Writes the graph to `path` atomically (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let io = |source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = tmp_path(path);
        {
            let file = std::fs::File::create(&tmp).map_err(io)?;
            let mut out = BufWriter::new(file);
            for record in self.records() {
                let line = serde_json::to_string(&record).expect("graph records serialize");
                out.write_all(line.as_bytes()).map_err(io)?;
                out.write_all(b"\n").map_err(io)?;
            }
            out.flush().map_err(io)?;
            out.get_ref().sync_all().map_err(io)?;
        }
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| GraphError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if !line.trim().is_empty() {
                lines.push((i + 1, line));
            }
        }
        Self::from_lines(lines)
    }

    /// Serialises to the JSON-lines format as a string.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in self.records() {
            out.push_str(&serde_json::to_string(&record).expect("graph records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GraphError> {
        Self::from_lines(
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| (i + 1, l.to_string()))
                .collect(),
        )
    }

    fn records(&self) -> Vec<Record> {
        let mut records = vec![Record::Header {
            format: FORMAT_VERSION,
            embedding_dim: self.embedding_dim,
        }];
        records.extend(self.classes.values().cloned().map(Record::ConceptClass));
        records.extend(self.concepts.values().cloned().map(Record::Concept));
        records.extend(self.documents.values().cloned().map(Record::Document));
        records.extend(self.sections.values().cloned().map(Record::Section));
        records.extend(self.chunks.values().cloned().map(Record::Chunk));
        records.extend(self.objects.values().cloned().map(Record::Object));
        records.extend(self.edges.values().map(Record::from_edge));
        records
    }

    fn from_lines(lines: Vec<(usize, String)>) -> Result<Self, GraphError> {
        let mut iter = lines.into_iter();
        let mut graph = TripartiteGraph::new();
        match iter.next() {
            None => {
                return Err(GraphError::CorruptRecord {
                    line: 1,
                    message: "missing header".into(),
                })
            }
            Some((line, text)) => {
                let header: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| GraphError::CorruptRecord {
                        line,
                        message: e.to_string(),
                    })?;
                if header.get("t").and_then(|t| t.as_str()) != Some("header") {
                    return Err(GraphError::CorruptRecord {
                        line,
                        message: "first record must be the header".into(),
                    });
                }
                let format = header.get("format").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
                if format != FORMAT_VERSION {
                    return Err(GraphError::FormatVersionMismatch { found: format });
                }
                graph.embedding_dim = match header.get("embedding_dim") {
                    None | Some(serde_json::Value::Null) => None,
                    Some(v) => match v.as_u64() {
                        Some(d) => Some(d as usize),
                        None => {
                            return Err(GraphError::CorruptRecord {
                                line,
                                message: "embedding_dim must be an integer".into(),
                            })
                        }
                    },
                };
            }
        }

        // Nodes first so edges can resolve endpoints regardless of file order.
        let mut edges = Vec::new();
        for (line, text) in iter {
            let record: Record = serde_json::from_str(&text).map_err(|e| GraphError::CorruptRecord {
                line,
                message: e.to_string(),
            })?;
            match record.into_node() {
                Ok(node) => {
                    graph.upsert_node(node);
                }
                Err(Some(edge)) => edges.push((line, edge)),
                Err(None) => {
                    return Err(GraphError::CorruptRecord {
                        line,
                        message: "duplicate header".into(),
                    })
                }
            }
        }
        for (line, edge) in edges {
            let id = edge.id();
            if graph.edges.contains_key(&id) {
                return Err(GraphError::CorruptRecord {
                    line,
                    message: format!("duplicate edge `{id}`"),
                });
            }
            graph.insert_edge(edge).map_err(|e| GraphError::CorruptRecord {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(graph)
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header {
        format: u32,
        embedding_dim: Option<usize>,
    },
    Object(ObjectNode),
    ConceptClass(ConceptClass),
    Concept(Concept),
    Document(DocumentNode),
    Section(SectionNode),
    Chunk(ChunkNode),
    ObjectConcept(EdgeRecord),
    ConceptChunk(EdgeRecord),
    ClassConcept(EdgeRecord),
    DocSection(EdgeRecord),
    SectionChunk(EdgeRecord),
    ChunkNext(EdgeRecord),
}

impl Record {
    fn from_edge(edge: &Edge) -> Record {
        let r = EdgeRecord {
            source: edge.source.clone(),
            target: edge.target.clone(),
            summary: edge.summary.clone(),
            embedding: edge.embedding.clone(),
        };
        match edge.kind {
            EdgeKind::ObjectConcept => Record::ObjectConcept(r),
            EdgeKind::ConceptChunk => Record::ConceptChunk(r),
            EdgeKind::ClassConcept => Record::ClassConcept(r),
            EdgeKind::DocSection => Record::DocSection(r),
            EdgeKind::SectionChunk => Record::SectionChunk(r),
            EdgeKind::ChunkNext => Record::ChunkNext(r),
        }
    }

    /// `Ok(node)`, `Err(Some(edge))`, or `Err(None)` for a header.
    fn into_node(self) -> Result<Node, Option<Edge>> {
        let edge = |kind: EdgeKind, r: EdgeRecord| {
            Err(Some(Edge {
                kind,
                source: r.source,
                target: r.target,
                summary: r.summary,
                embedding: r.embedding,
            }))
        };
        match self {
            Record::Header { .. } => Err(None),
            Record::Object(n) => Ok(Node::Object(n)),
            Record::ConceptClass(n) => Ok(Node::ConceptClass(n)),
            Record::Concept(n) => Ok(Node::Concept(n)),
            Record::Document(n) => Ok(Node::Document(n)),
            Record::Section(n) => Ok(Node::Section(n)),
            Record::Chunk(n) => Ok(Node::Chunk(n)),
            Record::ObjectConcept(r) => edge(EdgeKind::ObjectConcept, r),
            Record::ConceptChunk(r) => edge(EdgeKind::ConceptChunk, r),
            Record::ClassConcept(r) => edge(EdgeKind::ClassConcept, r),
            Record::DocSection(r) => edge(EdgeKind::DocSection, r),
            Record::SectionChunk(r) => edge(EdgeKind::SectionChunk, r),
            Record::ChunkNext(r) => edge(EdgeKind::ChunkNext, r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn object_to_chunk_edge_is_a_kind_mismatch() {
        let mut g = fixtures::three_patient_graph();
        let err = g
            .insert_edge(Edge::annotated(EdgeKind::ObjectConcept, "barbara-schmidt", "guideline:s0:c1", "x"))
            .unwrap_err();
        assert!(matches!(err, GraphError::KindMismatch { expected: NodeKind::Concept, found: NodeKind::Chunk, .. }));
        // and the reverse direction through the concept_chunk kind
        let err = g
            .insert_edge(Edge::annotated(EdgeKind::ConceptChunk, "barbara-schmidt", "guideline:s0:c1", "x"))
            .unwrap_err();
        assert!(matches!(err, GraphError::KindMismatch { found: NodeKind::Object, .. }));
    }

    #[test]
    fn reingesting_unchanged_document_keeps_chunk_embeddings() {
        let cfg = crate::corpus::ChunkingConfig::default();
        let (stem, text) = fixtures::CORPUS[0];
        let doc = crate::corpus::ingest_document(stem, stem, text, &cfg).unwrap();
        let mut g = TripartiteGraph::new();
        g.add_document(&doc).unwrap();
        let id = doc.chunks[0].chunk_id.clone();
        g.set_chunk_embedding(&id, vec![1.0, 0.0]).unwrap();
        let before = g.clone();
        g.add_document(&doc).unwrap();
        assert_eq!(g, before);

        let edited = crate::corpus::ingest_document(stem, stem, &text.replacen("Hypertension", "High blood pressure", 1), &cfg).unwrap();
        g.add_document(&edited).unwrap();
        assert!(g.chunk(&id).unwrap().embedding.is_none());
    }

    #[test]
    fn missing_endpoint() {
        let mut g = TripartiteGraph::new();
        let err = g
            .insert_edge(Edge::annotated(EdgeKind::ConceptChunk, "c", "t", "x"))
            .unwrap_err();
        assert!(matches!(err, GraphError::EndpointMissing { .. }));
    }

    #[test]
    fn duplicate_edge_returns_same_id() {
        let mut g = fixtures::three_patient_graph();
        let before = g.edge_count();
        let e = Edge::annotated(
            EdgeKind::ConceptChunk,
            fixtures::BLOOD_PRESSURE,
            fixtures::CHUNK_II,
            "different summary",
        );
        let id1 = g.insert_edge(e.clone()).unwrap();
        let id2 = g.insert_edge(e).unwrap();
        assert_eq!(id1, id2);
        assert_eq!(g.edge_count(), before);
        // first write wins
        assert_ne!(g.edge(&id1).unwrap().summary(), "different summary");
    }

    #[test]
    fn annotated_edges_need_summaries() {
        let mut g = fixtures::three_patient_graph();
        let mut e = Edge::annotated(EdgeKind::ConceptChunk, fixtures::BLOOD_PRESSURE, fixtures::CHUNK_I, " ");
        assert!(matches!(g.insert_edge(e.clone()), Err(GraphError::InvalidEdge { .. })));
        e.summary = None;
        assert!(matches!(g.insert_edge(e), Err(GraphError::InvalidEdge { .. })));
    }

    #[test]
    fn three_patient_fixture_counts() {
        let g = fixtures::three_patient_graph();
        let counts = g.edge_counts();
        assert_eq!(counts[&EdgeKind::ObjectConcept], 3);
        assert_eq!(counts[&EdgeKind::ConceptChunk], 2);
        assert_eq!(g.node_counts()[&NodeKind::Object], 3);
        assert_eq!(g.node_counts()[&NodeKind::Concept], 1);
        assert_eq!(g.node_counts()[&NodeKind::Chunk], 2);
        assert!(g.node_count() >= 6);
        assert!(g.validate().is_empty(), "{:?}", g.validate());
    }

    #[test]
    fn neighbors_are_sorted_and_bidirectional() {
        let g = fixtures::three_patient_graph();
        let concept = NodeRef::new(NodeKind::Concept, fixtures::BLOOD_PRESSURE);
        let chunks = g.neighbors(&concept, EdgeKind::ConceptChunk).unwrap();
        let ids: Vec<_> = chunks.iter().map(|(_, n)| n.id.as_str()).collect();
        assert_eq!(ids, [fixtures::CHUNK_I, fixtures::CHUNK_II]);

        let chunk = NodeRef::new(NodeKind::Chunk, fixtures::CHUNK_II);
        let concepts = g.neighbors(&chunk, EdgeKind::ConceptChunk).unwrap();
        assert_eq!(concepts.len(), 1);
        assert_eq!(concepts[0].1, concept);

        let unknown = NodeRef::new(NodeKind::Object, "nobody");
        assert!(matches!(g.neighbors(&unknown, EdgeKind::ObjectConcept), Err(GraphError::UnknownNode(_))));
    }

    #[test]
    fn chunk_lists_all_concepts_discussing_it() {
        let g = fixtures::shared_chunk_graph();
        let chunk = NodeRef::new(NodeKind::Chunk, "doc:s0:c0");
        let concepts: Vec<_> = g
            .neighbors(&chunk, EdgeKind::ConceptChunk)
            .unwrap()
            .into_iter()
            .map(|(_, n)| n.id)
            .collect();
        assert_eq!(concepts, ["cardio/blood-pressure", "cardio/heart-rate"]);
    }

    #[test]
    fn object_without_concepts_has_no_neighbors() {
        let mut g = fixtures::three_patient_graph();
        g.add_object(ObjectNode {
            object_id: "lonely".into(),
            title: "Lonely".into(),
            text: "Nothing relevant.".into(),
        });
        let n = NodeRef::new(NodeKind::Object, "lonely");
        assert!(g.neighbors(&n, EdgeKind::ObjectConcept).unwrap().is_empty());
    }

    #[test]
    fn empty_graph_round_trip() {
        let g = TripartiteGraph::new();
        assert_eq!(TripartiteGraph::from_jsonl(&g.to_jsonl()).unwrap(), g);
    }

    #[test]
    fn fixture_round_trip_through_file() {
        let g = fixtures::three_patient_graph();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        g.save(&path).unwrap();
        let loaded = TripartiteGraph::load(&path).unwrap();
        assert_eq!(loaded, g);
        assert_eq!(loaded.to_jsonl(), g.to_jsonl());
        assert!(!tmp_path(&path).exists());
    }

    #[test]
    fn header_is_first_line() {
        let g = fixtures::three_patient_graph();
        let first = g.to_jsonl().lines().next().unwrap().to_string();
        assert_eq!(first, r#"{"t":"header","format":1,"embedding_dim":3}"#);
    }

    #[test]
    fn unknown_record_kind_is_corrupt() {
        let text = "{\"t\":\"header\",\"format\":1,\"embedding_dim\":null}\n{\"t\":\"widget\",\"id\":\"x\"}\n";
        assert!(matches!(
            TripartiteGraph::from_jsonl(text),
            Err(GraphError::CorruptRecord { line: 2, .. })
        ));
    }

    #[test]
    fn wrong_format_version() {
        let text = "{\"t\":\"header\",\"format\":7,\"embedding_dim\":null}\n";
        assert!(matches!(
            TripartiteGraph::from_jsonl(text),
            Err(GraphError::FormatVersionMismatch { found: 7 })
        ));
    }

    #[test]
    fn dangling_edge_in_file_is_corrupt() {
        let text = "{\"t\":\"header\",\"format\":1,\"embedding_dim\":null}\n\
                    {\"t\":\"chunk_next\",\"source\":\"a\",\"target\":\"b\"}\n";
        assert!(matches!(
            TripartiteGraph::from_jsonl(text),
            Err(GraphError::CorruptRecord { line: 2, .. })
        ));
    }

    #[test]
    fn embedding_dimension_is_fixed_per_graph() {
        let mut g = fixtures::three_patient_graph();
        let id = edge_id(EdgeKind::ConceptChunk, fixtures::BLOOD_PRESSURE, fixtures::CHUNK_I);
        assert!(matches!(
            g.set_edge_embedding(&id, vec![1.0, 0.0]),
            Err(GraphError::DimensionMismatch { expected: 3, found: 2 })
        ));
        assert!(matches!(
            g.set_edge_embedding(&id, vec![f64::NAN, 0.0, 0.0]),
            Err(GraphError::InvalidEmbedding)
        ));
    }
}
