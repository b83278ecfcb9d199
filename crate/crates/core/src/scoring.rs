// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Relevance scores and per-concept empirical distributions.
//!
//! For an object `o`, concept `c` and chunk `t` with both edges `o→c` and
//! `c→t` present, the score is the cosine between the two edge-summary
//! embeddings. All scores observed for a concept, across every object and
//! chunk, form that concept's empirical distribution; a score's
//! probability is its empirical CDF value (`#samples ≤ w / n`), so the top
//! sample of a distribution always maps to 1.0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotate::bounded_map;
use crate::graph::{EdgeKind, GraphError, NodeKind, NodeRef, TripartiteGraph};
use crate::llmclient::{BackendError, EmbedderBackend};

#[derive(Debug, thiserror::Error)]
pub enum ScoringError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("backend dimension {found} does not match graph dimension {expected}")]
    GraphDimensionMismatch { expected: usize, found: usize },
    #[error("edge `{0}` has no embedding")]
    MissingEmbedding(String),
    #[error("chunk `{0}` has no raw-text embedding")]
    MissingChunkEmbedding(String),
    #[error("no samples for concept `{0}`")]
    EmptySamples(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(#[from] BackendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("scores file line {line}: {message}")]
    ScoresFormat { line: usize, message: String },
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ScoringError> {
    if u.len() != v.len() {
        return Err(ScoringError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(ScoringError::ZeroVector);
    }
    // sqrt(uu * vv) keeps cosine(v, v) exactly 1 where a product of two
    // square roots would not; fall back when the product leaves range.
    let prod = uu * vv;
    let denom = if prod.is_finite() && prod > 0.0 {
        prod.sqrt()
    } else {
        uu.sqrt() * vv.sqrt()
    };
    Ok((dot / denom).clamp(-1.0, 1.0))
}

fn check_backend_dim(graph: &TripartiteGraph, backend: &dyn EmbedderBackend) -> Result<usize, ScoringError> {
    let d = backend.dimension()?;
    match graph.embedding_dim() {
        Some(expected) if expected != d => Err(ScoringError::GraphDimensionMismatch { expected, found: d }),
        _ => Ok(d),
    }
}

fn check_vector(v: &[f64], d: usize) -> Result<(), ScoringError> {
    if v.len() != d {
        return Err(BackendError::DimensionDrift {
            expected: d,
            found: v.len(),
        }
        .into());
    }
    Ok(())
}

/// Embeds the summary of every annotated edge that has no embedding yet
/// (every annotated edge when `force`). Returns the number embedded.
pub fn embed_edges(
    graph: &mut TripartiteGraph,
    backend: &dyn EmbedderBackend,
    force: bool,
    max_in_flight: usize,
) -> Result<usize, ScoringError> {
    let d = check_backend_dim(graph, backend)?;
    let todo: Vec<(String, String)> = graph
        .edges()
        .filter(|e| e.kind.is_annotated() && (force || e.embedding.is_none()))
        .map(|e| (e.id(), e.summary().to_string()))
        .collect();
    let vectors = bounded_map(&todo, max_in_flight, |(_, summary)| backend.embed(summary));
    for ((id, _), v) in todo.iter().zip(vectors) {
        let v = v?;
        check_vector(&v, d)?;
        graph.set_edge_embedding(id, v)?;
    }
    Ok(todo.len())
}

/// Embeds raw chunk text for the naive retrieval baseline.
pub fn embed_chunks(
    graph: &mut TripartiteGraph,
    backend: &dyn EmbedderBackend,
    force: bool,
    max_in_flight: usize,
) -> Result<usize, ScoringError> {
    let d = check_backend_dim(graph, backend)?;
    let todo: Vec<(String, String)> = graph
        .chunks()
        .filter(|c| force || c.embedding.is_none())
        .map(|c| (c.chunk_id.clone(), c.text.clone()))
        .collect();
    let vectors = bounded_map(&todo, max_in_flight, |(_, text)| backend.embed(text));
    for ((id, _), v) in todo.iter().zip(vectors) {
        let v = v?;
        check_vector(&v, d)?;
        graph.set_chunk_embedding(id, v)?;
    }
    Ok(todo.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub object_id: String,
    pub concept_id: String,
    pub chunk_id: String,
    pub w: f64,
}

fn edge_embedding<'g>(graph: &'g TripartiteGraph, kind: EdgeKind, a: &str, b: &str) -> Result<&'g [f64], ScoringError> {
    let edge = graph
        .edge_between(kind, a, b)
        .ok_or_else(|| ScoringError::MissingEmbedding(crate::graph::edge_id(kind, a, b)))?;
    edge.embedding
        .as_deref()
        .ok_or_else(|| ScoringError::MissingEmbedding(edge.id()))
}

/// Score for one (object, concept, chunk) triple.
pub fn score(graph: &TripartiteGraph, object_id: &str, concept_id: &str, chunk_id: &str) -> Result<f64, ScoringError> {
    let u = edge_embedding(graph, EdgeKind::ObjectConcept, object_id, concept_id)?;
    let v = edge_embedding(graph, EdgeKind::ConceptChunk, concept_id, chunk_id)?;
    cosine(u, v)
}

/// One record per (o, c, t) with both edges present, ordered by
/// (object, concept, chunk).
pub fn score_all(graph: &TripartiteGraph) -> Result<Vec<ScoreRecord>, ScoringError> {
    let mut chunks_of: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for concept in graph.concepts() {
        let node = NodeRef::new(NodeKind::Concept, &concept.concept_id);
        let chunks = graph
            .neighbors(&node, EdgeKind::ConceptChunk)?
            .into_iter()
            .map(|(_, n)| n.id)
            .collect();
        chunks_of.insert(concept.concept_id.as_str(), chunks);
    }

    let mut records = Vec::new();
    for object in graph.objects() {
        let node = NodeRef::new(NodeKind::Object, &object.object_id);
        for (_, concept) in graph.neighbors(&node, EdgeKind::ObjectConcept)? {
            for chunk_id in chunks_of.get(concept.id.as_str()).into_iter().flatten() {
                records.push(ScoreRecord {
                    object_id: object.object_id.clone(),
                    concept_id: concept.id.clone(),
                    chunk_id: chunk_id.clone(),
                    w: score(graph, &object.object_id, &concept.id, chunk_id)?,
                });
            }
        }
    }
    Ok(records)
}

/// Empirical distribution of scores for one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDistribution {
    pub concept_id: String,
    /// Ascending.
    samples: Vec<f64>,
}

impl ConceptDistribution {
    pub fn from_samples(concept_id: &str, mut samples: Vec<f64>) -> Result<Self, ScoringError> {
        if samples.is_empty() {
            return Err(ScoringError::EmptySamples(concept_id.to_string()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            concept_id: concept_id.to_string(),
            samples,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of samples `≤ w`.
    pub fn probability(&self, w: f64) -> f64 {
        let at_or_below = self.samples.partition_point(|&s| s <= w);
        at_or_below as f64 / self.samples.len() as f64
    }

    /// Smallest sample whose CDF value reaches `q` (0 < q ≤ 1).
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.samples.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.samples[rank - 1]
    }

    /// A single-sample distribution always yields probability 1.
    pub fn low_sample_confidence(&self) -> bool {
        self.samples.len() < 2
    }

    pub fn summary(&self) -> DistributionSummary {
        DistributionSummary {
            concept_id: self.concept_id.clone(),
            n: self.len(),
            min: self.samples[0],
            max: self.samples[self.len() - 1],
            deciles: (1..=9).map(|k| self.quantile(k as f64 / 10.0)).collect(),
            low_sample_confidence: self.low_sample_confidence(),
        }
    }
}

/// Empirical CDF value of `w` under `dist`.
pub fn empirical_probability(dist: &ConceptDistribution, w: f64) -> f64 {
    dist.probability(w)
}

/// Builds the distribution for one concept from its records.
pub fn build_distribution(concept_id: &str, records: &[ScoreRecord]) -> Result<ConceptDistribution, ScoringError> {
    ConceptDistribution::from_samples(
        concept_id,
        records
            .iter()
            .filter(|r| r.concept_id == concept_id)
            .map(|r| r.w)
            .collect(),
    )
}

/// One distribution per concept that has at least one record.
pub fn build_distributions(records: &[ScoreRecord]) -> BTreeMap<String, ConceptDistribution> {
    let mut by_concept: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_concept.entry(r.concept_id.clone()).or_default().push(r.w);
    }
    by_concept
        .into_iter()
        .map(|(c, samples)| {
            let dist = ConceptDistribution::from_samples(&c, samples).expect("non-empty by construction");
            (c, dist)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub concept_id: String,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub deciles: Vec<f64>,
    pub low_sample_confidence: bool,
}

/// CSV with header `object_id,concept_id,chunk_id,w,p`.
pub fn scores_csv(records: &[ScoreRecord], distributions: &BTreeMap<String, ConceptDistribution>) -> String {
    let mut out = String::from("object_id,concept_id,chunk_id,w,p\n");
    for r in records {
        let p = distributions
            .get(&r.concept_id)
            .map(|d| d.probability(r.w))
            .unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.object_id),
            csv_field(&r.concept_id),
            csv_field(&r.chunk_id),
            r.w,
            p
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match (ch, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    fields.push(cur);
    fields
}

/// Parses the output of [`scores_csv`]. The `p` column is ignored; it is
/// recomputed from the distributions.
pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRecord>, ScoringError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "object_id,concept_id,chunk_id,w,p" => {}
        _ => {
            return Err(ScoringError::ScoresFormat {
                line: 1,
                message: "unexpected header".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv_line(line);
        if fields.len() != 5 {
            return Err(ScoringError::ScoresFormat {
                line: i + 1,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let w: f64 = fields[3].parse().map_err(|_| ScoringError::ScoresFormat {
            line: i + 1,
            message: format!("bad score `{}`", fields[3]),
        })?;
        let mut it = fields.into_iter();
        records.push(ScoreRecord {
            object_id: it.next().unwrap(),
            concept_id: it.next().unwrap(),
            chunk_id: it.next().unwrap(),
            w,
        });
    }
    Ok(records)
}

/// Concepts present in `records`, used to detect stale score files.
pub fn scored_concepts(records: &[ScoreRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.concept_id.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::llmclient::MockEmbedder;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(ScoringError::DimensionMismatch(1, 2))));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(ScoringError::ZeroVector)));
    }

    #[test]
    fn cdf_examples() {
        let d = ConceptDistribution::from_samples("c", vec![0.5, 0.1, 0.7, 0.3, 0.2, 0.4]).unwrap();
        assert_eq!(d.samples(), &[0.1, 0.2, 0.3, 0.4, 0.5, 0.7]);
        assert_eq!(d.probability(0.7), 1.0);
        assert_eq!(d.probability(0.3), 0.5);
        assert_eq!(d.probability(0.05), 0.0);
        assert!(d.probability(0.7) > 0.9);
    }

    #[test]
    fn single_sample_is_always_selected() {
        let d = ConceptDistribution::from_samples("c", vec![0.7]).unwrap();
        assert_eq!(d.samples(), &[0.7]);
        assert_eq!(d.probability(0.7), 1.0);
        assert!(d.low_sample_confidence());
        assert!(matches!(
            ConceptDistribution::from_samples("c", vec![]),
            Err(ScoringError::EmptySamples(_))
        ));
    }

    #[test]
    fn ties_count_as_at_or_below() {
        let d = ConceptDistribution::from_samples("c", vec![0.2, 0.5, 0.5, 0.9]).unwrap();
        assert_eq!(d.probability(0.5), 0.75);
    }

    #[test]
    fn quantiles_invert_the_cdf() {
        let d = ConceptDistribution::from_samples("c", (1..=10).map(|i| i as f64 / 10.0).collect()).unwrap();
        let s = d.summary();
        assert_eq!(s.n, 10);
        assert_eq!(s.deciles[0], 0.1);
        assert_eq!(s.deciles[8], 0.9);
        for q in s.deciles {
            assert!(d.probability(q) >= 0.1);
        }
    }

    #[test]
    fn three_patient_fixture_has_six_scores() {
        let g = fixtures::three_patient_graph();
        let records = score_all(&g).unwrap();
        assert_eq!(records.len(), 6);
        for (obj, w1, w2) in fixtures::THREE_PATIENT_SCORES {
            for (chunk, w) in [(fixtures::CHUNK_I, w1), (fixtures::CHUNK_II, w2)] {
                let r = records
                    .iter()
                    .find(|r| r.object_id == obj && r.chunk_id == chunk)
                    .unwrap();
                assert!((r.w - w).abs() < 1e-12, "{obj} {chunk}: {}", r.w);
            }
        }
        let dist = build_distribution(fixtures::BLOOD_PRESSURE, &records).unwrap();
        assert_eq!(dist.len(), 6);
        let top = records
            .iter()
            .find(|r| r.object_id == fixtures::BARBARA && r.chunk_id == fixtures::CHUNK_II)
            .unwrap();
        assert_eq!(dist.probability(top.w), 1.0);
    }

    #[test]
    fn object_without_chunk_edges_scores_nothing() {
        let mut g = fixtures::three_patient_graph();
        let ontology = crate::ontology::parse_ontology(
            r#"{"version":"x","classes":[{"name":"Other","concepts":[{"name":"Lonely"}]}]}"#,
        )
        .unwrap();
        g.plug_ontology(&ontology).unwrap();
        g.insert_edge(crate::graph::Edge::annotated(
            EdgeKind::ObjectConcept,
            fixtures::PETER,
            "other/lonely",
            "something",
        ))
        .unwrap();
        let records = score_all(&g);
        // The new edge is unembedded but has no partner chunk edges, so it
        // never enters a score.
        assert_eq!(records.unwrap().len(), 6);
    }

    #[test]
    fn missing_embedding_names_the_edge() {
        let mut g = fixtures::three_patient_graph();
        g.clear_embeddings();
        match score_all(&g) {
            Err(ScoringError::MissingEmbedding(id)) => assert!(id.starts_with("object_concept:")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn embed_edges_is_idempotent() {
        let mut g = fixtures::three_patient_graph();
        g.clear_embeddings();
        let backend = MockEmbedder::default();
        assert_eq!(embed_edges(&mut g, &backend, false, 2).unwrap(), 5);
        assert_eq!(embed_edges(&mut g, &backend, false, 2).unwrap(), 0);
        assert_eq!(g.embedding_dim(), Some(64));
    }

    #[test]
    fn backend_swap_with_other_dimension_is_rejected() {
        let mut g = fixtures::three_patient_graph();
        assert_eq!(g.embedding_dim(), Some(3));
        assert!(matches!(
            embed_edges(&mut g, &MockEmbedder::new(64), true, 1),
            Err(ScoringError::GraphDimensionMismatch { expected: 3, found: 64 })
        ));
    }

    #[test]
    fn identical_summaries_embed_identically() {
        let mut g = fixtures::three_patient_graph();
        g.clear_embeddings();
        embed_edges(&mut g, &MockEmbedder::default(), false, 1).unwrap();
        // Chunk-edge summaries are the chunk texts; embedding the same text
        // directly must give the stored vector.
        let e = g
            .edge_between(EdgeKind::ConceptChunk, fixtures::BLOOD_PRESSURE, fixtures::CHUNK_I)
            .unwrap();
        let direct = MockEmbedder::default().embed(e.summary()).unwrap();
        assert_eq!(e.embedding.as_deref().unwrap(), direct.as_slice());
    }

    #[test]
    fn scores_csv_round_trip() {
        let g = fixtures::three_patient_graph();
        let records = score_all(&g).unwrap();
        let dists = build_distributions(&records);
        let csv = scores_csv(&records, &dists);
        assert!(csv.starts_with("object_id,concept_id,chunk_id,w,p\n"));
        assert_eq!(parse_scores_csv(&csv).unwrap(), records);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(split_csv_line(r#"a,"b,c","d""e",f,1"#), vec!["a", "b,c", "d\"e", "f", "1"]);
        assert_eq!(csv_field("x,y"), "\"x,y\"");
    }
}
