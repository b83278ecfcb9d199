// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Small hand-built graphs and bundled fixture files used by tests,
//! benchmarks and the CLI's `--fixture` mode.
//!
//! Embeddings in these graphs are constructed so that every similarity
//! score is known in advance: concept–chunk edges get orthonormal basis
//! vectors, and each object–concept edge is `Σ w_k e_k + r e_extra` with
//! `r = sqrt(1 - Σ w_k²)`, giving `cos(object edge, chunk edge k) = w_k`.

use std::collections::BTreeMap;

use crate::annotate::ObjectNode;
use crate::corpus::{ingest_document, ChunkingConfig};
use crate::graph::{edge_id, Edge, EdgeKind, TripartiteGraph};
use crate::ontology::{parse_ontology, Ontology};
use crate::syngen::{Gold, GoldConcept, GoldObject};

/// 4 classes, 27 concepts.
pub const ONTOLOGY_JSON: &str = include_str!("../fixtures/ontology.json");

/// Tiny two-document corpus: (file stem, contents).
pub const CORPUS: [(&str, &str); 2] = [
    ("hypertension", include_str!("../fixtures/corpus/hypertension.txt")),
    ("diabetes", include_str!("../fixtures/corpus/diabetes.txt")),
];

/// Three synthetic patient records: (file stem, contents).
pub const OBJECTS: [(&str, &str); 3] = [
    ("barbara-schmidt", include_str!("../fixtures/objects/barbara-schmidt.txt")),
    ("oskar-lehm", include_str!("../fixtures/objects/oskar-lehm.txt")),
    ("peter-mueller", include_str!("../fixtures/objects/peter-mueller.txt")),
];

pub fn bundled_ontology() -> Ontology {
    parse_ontology(ONTOLOGY_JSON).expect("bundled ontology is valid")
}

/// Reference answers for the bundled corpus. A concept's marker is its
/// first keyword that occurs in some chunk; an object carries the concept
/// when its own text contains that marker.
pub fn bundled_gold(chunking: &ChunkingConfig) -> Gold {
    let ontology = bundled_ontology();
    let chunks: Vec<(String, String)> = CORPUS
        .iter()
        .flat_map(|(stem, text)| {
            ingest_document(stem, &format!("{stem}.txt"), text, chunking)
                .expect("bundled corpus ingests")
                .chunks
        })
        .map(|c| (c.chunk_id, c.text.to_lowercase()))
        .collect();
    let mut markers = BTreeMap::new();
    for concept in ontology.concepts() {
        let hit = concept
            .keywords
            .iter()
            .find(|k| chunks.iter().any(|(_, t)| t.contains(&k.to_lowercase())));
        if let Some(k) = hit {
            markers.insert(concept.concept_id.clone(), k.clone());
        }
    }
    let objects = OBJECTS
        .iter()
        .map(|(stem, text)| {
            let text = text.to_lowercase();
            let concepts = ontology
                .concepts()
                .filter_map(|c| {
                    let marker = markers.get(&c.concept_id)?.to_lowercase();
                    text.contains(&marker).then(|| GoldConcept {
                        concept_id: c.concept_id.clone(),
                        chunks: chunks
                            .iter()
                            .filter(|(_, t)| t.contains(&marker))
                            .map(|(id, _)| id.clone())
                            .collect(),
                    })
                })
                .collect();
            GoldObject {
                object_id: stem.to_string(),
                concepts,
            }
        })
        .collect();
    Gold { objects, markers }
}

pub const BLOOD_PRESSURE: &str = "symptoms/blood-pressure";
pub const CHUNK_I: &str = "guideline:s0:c0";
pub const CHUNK_II: &str = "guideline:s0:c1";
pub const PETER: &str = "peter-mueller";
pub const BARBARA: &str = "barbara-schmidt";
pub const OSKAR: &str = "oskar-lehm";

/// Scores w(object, blood pressure, chunk) in the three-patient graph,
/// as (object, w for chunk I, w for chunk II).
pub const THREE_PATIENT_SCORES: [(&str, f64, f64); 3] =
    [(PETER, 0.4, 0.2), (BARBARA, 0.1, 0.7), (OSKAR, 0.3, 0.5)];

const GUIDELINE: &str = "# Blood pressure management\n\
Office blood pressure above 140/90 mmHg confirms hypertension when repeated on separate visits. \
Home measurements complement office readings.\n\n\
Home blood pressure values above 135/85 mmHg indicate hypertension. Values of 170/90 mmHg or higher \
warrant prompt treatment review.\n";

fn object(id: &str, title: &str, text: &str) -> ObjectNode {
    ObjectNode {
        object_id: id.to_string(),
        title: title.to_string(),
        text: text.to_string(),
    }
}

/// Unit vector with prescribed cosines against the first `scores.len()`
/// basis vectors of a `dim`-dimensional space; the remainder goes into the
/// last axis.
pub fn vector_with_cosines(scores: &[f64], dim: usize) -> Vec<f64> {
    assert!(scores.len() < dim, "need one spare axis");
    let mut v = vec![0.0; dim];
    v[..scores.len()].copy_from_slice(scores);
    let rest: f64 = 1.0 - scores.iter().map(|w| w * w).sum::<f64>();
    assert!(rest >= 0.0, "cosines must have squared sum <= 1");
    v[dim - 1] = rest.sqrt();
    v
}

pub fn basis(axis: usize, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

/// Three objects, one concept (blood pressure), two chunks, all
/// object–concept and concept–chunk edges present and embedded. Barbara
/// Schmidt × chunk II is the top score (0.7) of the six.
pub fn three_patient_graph() -> TripartiteGraph {
    let ontology = parse_ontology(
        r#"{"version":"fixture","classes":[{"name":"Symptoms","concepts":[
            {"name":"Blood pressure","description":"Arterial blood pressure findings","keywords":["mmHg","blood pressure"]}]}]}"#,
    )
    .expect("fixture ontology");
    let doc = ingest_document(
        "guideline",
        "fixture://guideline",
        GUIDELINE,
        &ChunkingConfig { max_chunk_chars: 200 },
    )
    .expect("fixture document");
    assert_eq!(doc.chunks.len(), 2);

    let mut g = TripartiteGraph::new();
    g.plug_ontology(&ontology).unwrap();
    g.add_document(&doc).unwrap();
    g.add_object(object(PETER, "Peter Mueller", "Blood pressure 128/82 mmHg at the clinic."));
    g.add_object(object(
        BARBARA,
        "Barbara Schmidt",
        "Home blood pressure readings are 170 - 180/90 mmHg.",
    ));
    g.add_object(object(OSKAR, "Oskar Lehm", "Office blood pressure 150/95 mmHg on two visits."));

    let dim = 3;
    for (i, chunk) in [CHUNK_I, CHUNK_II].iter().enumerate() {
        let text = g.chunk(chunk).unwrap().text.clone();
        g.insert_edge(Edge::annotated(EdgeKind::ConceptChunk, BLOOD_PRESSURE, *chunk, text))
            .unwrap();
        g.set_edge_embedding(&edge_id(EdgeKind::ConceptChunk, BLOOD_PRESSURE, chunk), basis(i, dim))
            .unwrap();
    }
    for (obj, w1, w2) in THREE_PATIENT_SCORES {
        let summary = g.object(obj).unwrap().text.clone();
        g.insert_edge(Edge::annotated(EdgeKind::ObjectConcept, obj, BLOOD_PRESSURE, summary))
            .unwrap();
        g.set_edge_embedding(
            &edge_id(EdgeKind::ObjectConcept, obj, BLOOD_PRESSURE),
            vector_with_cosines(&[w1, w2], dim),
        )
        .unwrap();
    }
    g
}

pub const HEART_RATE: &str = "cardio/heart-rate";
pub const CARDIO_BP: &str = "cardio/blood-pressure";
pub const PATIENT: &str = "patient";
pub const CONTROL: &str = "control";

/// Two concepts declared as (heart rate, blood pressure); both discuss
/// chunk `doc:s0:c0`. Two objects link to both concepts.
///
/// Scores, chosen so that for `patient` at α = 0.9, β = 0.5:
/// blood pressure × `doc:s0:c0` is α-selected (p = 1), heart rate ×
/// `doc:s0:c1` is α-selected (p = 1) and heart rate × `doc:s0:c0` is
/// β-selected (p = 0.75, shares `doc:s0:c0` with an α node).
pub fn shared_chunk_graph() -> TripartiteGraph {
    let ontology = parse_ontology(
        r#"{"version":"fixture","classes":[{"name":"Cardio","concepts":[
            {"name":"Heart rate","keywords":["bpm"]},
            {"name":"Blood pressure","keywords":["mmHg"]}]}]}"#,
    )
    .expect("fixture ontology");
    let cfg = ChunkingConfig { max_chunk_chars: 200 };
    let doc = ingest_document(
        "doc",
        "fixture://doc",
        "# Vital signs\n\
         Resting heart rate above 80 bpm with blood pressure above 140/90 mmHg raises cardiovascular risk in older adults.\n\n\
         A resting heart rate of 60 to 100 bpm is considered normal in adults without structural heart disease.\n\n\
         # Targets\n\
         Treat to an office blood pressure below 130/80 mmHg in most adults when tolerated over several months.\n",
        &cfg,
    )
    .expect("fixture doc");
    let doc2 = ingest_document(
        "doc2",
        "fixture://doc2",
        "# Elderly\nIn frail elderly patients a systolic blood pressure target of 140 mmHg is acceptable when lower targets fail.\n",
        &cfg,
    )
    .expect("fixture doc2");
    assert_eq!(doc.chunks.len(), 3);

    let mut g = TripartiteGraph::new();
    g.plug_ontology(&ontology).unwrap();
    g.add_document(&doc).unwrap();
    g.add_document(&doc2).unwrap();
    g.add_object(object(PATIENT, "Patient A", "Heart rate 92 bpm. Blood pressure 165/95 mmHg."));
    g.add_object(object(CONTROL, "Patient B", "Heart rate 64 bpm. Blood pressure 118/76 mmHg."));

    // concept -> chunks in axis order
    let chunk_axes: [(&str, &[&str]); 2] = [
        (CARDIO_BP, &["doc:s0:c0", "doc:s1:c0", "doc2:s0:c0"]),
        (HEART_RATE, &["doc:s0:c0", "doc:s0:c1"]),
    ];
    // object -> concept -> scores in the same chunk order
    let scores: [(&str, &str, &[f64]); 4] = [
        (PATIENT, CARDIO_BP, &[0.6, 0.5, 0.2]),
        (CONTROL, CARDIO_BP, &[0.1, 0.3, 0.4]),
        (PATIENT, HEART_RATE, &[0.5, 0.8]),
        (CONTROL, HEART_RATE, &[0.3, 0.1]),
    ];
    let dim = 4;
    for (concept, chunks) in chunk_axes {
        for (axis, chunk) in chunks.iter().enumerate() {
            let text = g.chunk(chunk).unwrap().text.clone();
            let summary = focus_sentences(&text, concept);
            g.insert_edge(Edge::annotated(EdgeKind::ConceptChunk, concept, *chunk, summary))
                .unwrap();
            g.set_edge_embedding(&edge_id(EdgeKind::ConceptChunk, concept, chunk), basis(axis, dim))
                .unwrap();
        }
    }
    for (obj, concept, w) in scores {
        let text = g.object(obj).unwrap().text.clone();
        let summary = focus_sentences(&text, concept);
        g.insert_edge(Edge::annotated(EdgeKind::ObjectConcept, obj, concept, summary))
            .unwrap();
        g.set_edge_embedding(
            &edge_id(EdgeKind::ObjectConcept, obj, concept),
            vector_with_cosines(w, dim),
        )
        .unwrap();
    }
    g
}

fn focus_sentences(text: &str, concept: &str) -> String {
    let needle = if concept == HEART_RATE { "bpm" } else { "mmHg" };
    crate::text::sentence_spans(text)
        .into_iter()
        .map(|r| &text[r])
        .filter(|s| s.contains(needle))
        .collect::<Vec<_>>()
        .join(" ")
}
