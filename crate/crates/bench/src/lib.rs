// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded random inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tripartite_core::annotate::ObjectNode;
use tripartite_core::corpus::ingest_document;
use tripartite_core::graph::edge_id;
use tripartite_core::ontology::parse_ontology;
use tripartite_core::{ChunkingConfig, ClassificationGraph, ClassificationNode, Edge, EdgeKind, Ontology, TripartiteGraph};

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub objects: usize,
    pub concepts: usize,
    pub chunks: usize,
    /// Probability of each concept–chunk edge.
    pub density: f64,
    /// Probability of each object–concept edge.
    pub object_density: f64,
    pub dim: usize,
}

impl Shape {
    pub fn small() -> Self {
        Self {
            objects: 3,
            concepts: 27,
            chunks: 300,
            density: 0.1,
            object_density: 0.5,
            dim: 64,
        }
    }
}

pub fn ontology(concepts: usize) -> Ontology {
    let list: Vec<String> = (0..concepts).map(|i| format!(r#"{{"name":"Concept {i}"}}"#)).collect();
    parse_ontology(&format!(r#"{{"version":"bench","classes":[{{"name":"All","concepts":[{}]}}]}}"#, list.join(",")))
        .expect("bench ontology")
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Graph with random annotated, embedded edges. Same seed, same graph.
pub fn random_graph(shape: Shape, seed: u64) -> (TripartiteGraph, Ontology) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ontology = ontology(shape.concepts);
    let mut g = TripartiteGraph::new();
    g.plug_ontology(&ontology).expect("plug");

    let paragraphs: Vec<String> = (0..shape.chunks)
        .map(|i| format!("Paragraph {i} discusses a clinical finding in enough words to stand alone as exactly one retrieval chunk of bench text."))
        .collect();
    let text = format!("# Bench\n{}\n", paragraphs.join("\n\n"));
    let doc = ingest_document("bench", "bench.txt", &text, &ChunkingConfig { max_chunk_chars: 200 }).expect("ingest");
    g.add_document(&doc).expect("document");
    let chunk_ids: Vec<String> = doc.chunks.iter().map(|c| c.chunk_id.clone()).collect();

    for o in 0..shape.objects {
        let id = format!("object-{o}");
        g.add_object(ObjectNode::from_text(&id, "Bench object."));
        for c in &ontology.concepts {
            if rng.random_bool(shape.object_density) {
                g.insert_edge(Edge::annotated(EdgeKind::ObjectConcept, &id, &c.concept_id, "finding"))
                    .expect("edge");
                g.set_edge_embedding(&edge_id(EdgeKind::ObjectConcept, &id, &c.concept_id), unit_vector(&mut rng, shape.dim))
                    .expect("embedding");
            }
        }
    }
    for c in &ontology.concepts {
        for t in &chunk_ids {
            if rng.random_bool(shape.density) {
                g.insert_edge(Edge::annotated(EdgeKind::ConceptChunk, &c.concept_id, t, "evidence"))
                    .expect("edge");
                g.set_edge_embedding(&edge_id(EdgeKind::ConceptChunk, &c.concept_id, t), unit_vector(&mut rng, shape.dim))
                    .expect("embedding");
            }
        }
    }
    (g, ontology)
}

/// Classification graph of `nodes` random (concept, chunk) pairs drawn
/// from `concepts` × `chunks`, with uniform CDF values.
pub fn random_classification_graph(nodes: usize, concepts: usize, chunks: usize, seed: u64) -> ClassificationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(nodes);
    while out.len() < nodes.min(concepts * chunks) {
        let (c, t) = (rng.random_range(0..concepts), rng.random_range(0..chunks));
        if seen.insert((c, t)) {
            let p: f64 = rng.random();
            out.push(ClassificationNode::new(format!("c{c:03}"), format!("t{t:05}"), p, p));
        }
    }
    ClassificationGraph::from_nodes("object", out)
}
