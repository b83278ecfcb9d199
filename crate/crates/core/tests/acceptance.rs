// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks. Each test prints one `PASS` / `FAIL` line and fails
//! on any violated expectation or time budget.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::strategy::Strategy;
use proptest::test_runner::TestCaseError;

use tripartite_core::annotate::{run_annotation, AnnotationScope, MockAnnotator, ObjectNode};
use tripartite_core::baseline::Method;
use tripartite_core::classify::{build_classification_graph, classify, selected_pairs, ActivatedBy, ClassificationGraph, ClassificationNode, SelectedPair, Thresholds};
use tripartite_core::corpus::{ingest_document, ChunkingConfig};
use tripartite_core::fixtures;
use tripartite_core::graph::{Edge, EdgeKind, GraphError, TripartiteGraph};
use tripartite_core::ontology::{parse_ontology, Ontology};
use tripartite_core::pipeline::{run_mock_pipeline, PipelineOptions, DEFAULT_NAIVE_MINIMA};
use tripartite_core::prompt::{assemble_prompt, render, BlockKind, HeuristicCounter, PromptBlock, PromptPlan, Provenance, QueryTemplate};
use tripartite_core::scoring::{build_distributions, embed_edges, score_all};
use tripartite_core::syngen::PlantPlan;
use tripartite_core::llmclient::MockEmbedder;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn report(id: u8, name: &str, budget: Duration, body: impl FnOnce() -> Check) {
    let start = Instant::now();
    let mut outcome = body();
    let elapsed = start.elapsed();
    if outcome.is_ok() && elapsed > budget {
        outcome = Err(format!("took {elapsed:?}, budget {budget:?}"));
    }
    match &outcome {
        Ok(()) => println!("PASS criterion {id}: {name} ({elapsed:.2?})"),
        Err(why) => println!("FAIL criterion {id}: {name}: {why}"),
    }
    if let Err(why) = outcome {
        panic!("criterion {id} failed: {why}");
    }
}

fn classified(graph: &TripartiteGraph, object: &str, th: &Thresholds) -> Result<ClassificationGraph, String> {
    let dists = build_distributions(&score_all(graph).map_err(|e| e.to_string())?);
    let cg = build_classification_graph(graph, &dists, object).map_err(|e| e.to_string())?;
    Ok(classify(&cg, th))
}

fn pairs(cg: &ClassificationGraph) -> BTreeSet<(String, String)> {
    selected_pairs(cg)
        .into_iter()
        .map(|p| (p.concept_id, p.chunk_id))
        .collect()
}

#[test]
fn criterion_1_top_score_selects_chunk_two() {
    report(1, "top-scoring chunk selected at alpha 0.9", Duration::from_secs(1), || {
        let g = fixtures::three_patient_graph();
        let records = score_all(&g).map_err(|e| e.to_string())?;
        ensure!(records.len() == 6, "expected 6 scores, got {}", records.len());
        let top = records
            .iter()
            .max_by(|a, b| a.w.total_cmp(&b.w))
            .ok_or("no scores")?;
        ensure!(
            top.object_id == fixtures::BARBARA && top.chunk_id == fixtures::CHUNK_II,
            "maximum is {top:?}"
        );
        ensure!((top.w - 0.7).abs() < 1e-12, "top score {}", top.w);

        let cg = classified(&g, fixtures::BARBARA, &Thresholds::new(0.9, 0.5).unwrap())?;
        let expected: BTreeSet<(String, String)> =
            [(fixtures::BLOOD_PRESSURE.to_string(), fixtures::CHUNK_II.to_string())].into();
        ensure!(pairs(&cg) == expected, "selected {:?}", pairs(&cg));
        ensure!(
            selected_pairs(&cg)[0].activated_by == ActivatedBy::Alpha,
            "chunk II not alpha-activated"
        );
        Ok(())
    });
}

#[test]
fn criterion_2_beta_interaction() {
    report(2, "beta activation through a shared chunk", Duration::from_secs(1), || {
        let cg = ClassificationGraph::from_nodes(
            "o",
            vec![
                ClassificationNode::new("c-i", "t", 0.0, 0.95),
                ClassificationNode::new("c-j", "t", 0.0, 0.6),
            ],
        );
        ensure!(cg.interaction_edges == vec![(0, 1)], "edges {:?}", cg.interaction_edges);
        let loose = classify(&cg, &Thresholds::new(0.9, 0.5).unwrap());
        let got: Vec<ActivatedBy> = loose.nodes.iter().map(|n| n.activated_by).collect();
        ensure!(got == vec![ActivatedBy::Alpha, ActivatedBy::Beta], "at beta 0.5: {got:?}");
        let strict = classify(&cg, &Thresholds::new(0.9, 0.7).unwrap());
        let got: Vec<ActivatedBy> = strict.nodes.iter().map(|n| n.activated_by).collect();
        ensure!(got == vec![ActivatedBy::Alpha, ActivatedBy::None], "at beta 0.7: {got:?}");

        // Same rule on a full graph: heart rate on the shared chunk has p = 0.75.
        let g = fixtures::shared_chunk_graph();
        let cg = classified(&g, fixtures::PATIENT, &Thresholds::new(0.9, 0.5).unwrap())?;
        let beta: Vec<SelectedPair> = selected_pairs(&cg)
            .into_iter()
            .filter(|p| p.activated_by == ActivatedBy::Beta)
            .collect();
        ensure!(
            beta.len() == 1 && beta[0].concept_id == fixtures::HEART_RATE && beta[0].chunk_id == "doc:s0:c0",
            "beta selections {beta:?}"
        );
        let cg = classified(&g, fixtures::PATIENT, &Thresholds::new(0.9, 0.8).unwrap())?;
        ensure!(
            selected_pairs(&cg).iter().all(|p| p.activated_by == ActivatedBy::Alpha),
            "beta node kept at beta 0.8"
        );
        Ok(())
    });
}

/// Runs one property for the full case count on a fresh runner.
fn check<S: Strategy>(
    name: &str,
    strategy: S,
    property: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Check {
    common::runner()
        .run(&strategy, property)
        .map_err(|e| format!("{name}: {e}"))
}

#[test]
fn criterion_3_property_suite() {
    report(3, "randomised properties, 1000 cases each", Duration::from_secs(60), || {
        check("cosine", common::vec_pair(), common::cosine_props)?;
        check("cdf", common::samples_and_probes(), common::cdf_props)?;
        check("alpha monotone", common::graph_and_triple(), common::alpha_monotone)?;
        check("beta monotone", common::graph_and_triple(), common::beta_monotone)?;
        check("collapse", common::graph_and_pair(), common::collapse)?;
        check("oracle", common::graph_and_pair(), common::oracle_equivalence)?;
        Ok(())
    });
}

/// Graph file bytes, rendered prompts and density CSV of one run.
type RunArtifacts = (Vec<u8>, Vec<(String, String)>, String);

fn run_once(out_dir: &std::path::Path, max_in_flight: usize) -> Result<RunArtifacts, String> {
    let plan = PlantPlan {
        seed: 42,
        ..PlantPlan::default()
    };
    let out = run_mock_pipeline(&plan, &fixtures::bundled_ontology(), &PipelineOptions {
        max_in_flight,
        ..PipelineOptions::default()
    })
    .map_err(|e| e.to_string())?;
    let path = out_dir.join("graph.jsonl");
    out.graph.save(&path).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let csv = out.density_csv();
    Ok((bytes, out.prompts.into_iter().collect(), csv))
}

#[test]
fn criterion_4_determinism() {
    report(4, "mock pipeline is byte-identical across runs", Duration::from_secs(30), || {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = run_once(a.path(), 1)?;
        // Different worker counts must not change any byte.
        let second = run_once(b.path(), 8)?;
        ensure!(first.0 == second.0, "graph files differ");
        ensure!(first.1 == second.1, "prompt texts differ");
        ensure!(first.2 == second.2, "density CSVs differ");
        ensure!(first.1.len() == 3, "expected 3 prompts, got {}", first.1.len());
        Ok(())
    });
}

#[test]
fn criterion_5_density_direction() {
    report(5, "tripartite prompts are denser than naive retrieval", Duration::from_secs(120), || {
        let out = run_mock_pipeline(&PlantPlan::default(), &fixtures::bundled_ontology(), &PipelineOptions::default())
            .map_err(|e| e.to_string())?;
        let docs = out.graph.documents().count();
        let chunks = out.graph.chunks().count();
        ensure!(docs == 6, "{docs} documents");
        ensure!((6 * 31..=6 * 63).contains(&chunks), "{chunks} chunks");
        ensure!(out.ontology.concepts.len() == 27, "{} concepts", out.ontology.concepts.len());
        ensure!(out.gold.objects.len() == 3, "{} objects", out.gold.objects.len());
        print!("{}", out.density_csv());

        let mut recall_wins = 0;
        for gold in &out.gold.objects {
            let rows: Vec<_> = out.reports.iter().filter(|r| r.object_id == gold.object_id).collect();
            let tri = rows
                .iter()
                .find(|r| r.method == Method::Tripartite)
                .ok_or("missing tripartite row")?;
            let naive: Vec<_> = rows.iter().filter(|r| r.method == Method::Naive).collect();
            ensure!(naive.len() == DEFAULT_NAIVE_MINIMA.len(), "naive rows for {}", gold.object_id);
            for n in &naive {
                ensure!(
                    tri.density > n.density,
                    "{}: tripartite {} <= naive {} ({})",
                    gold.object_id,
                    tri.density,
                    n.density,
                    n.config
                );
            }
            if naive.iter().all(|n| tri.concepts_recovered >= n.concepts_recovered) {
                recall_wins += 1;
            }
        }
        ensure!(recall_wins >= 2, "tripartite recall at least naive for only {recall_wins} objects");
        Ok(())
    });
}

fn small_world() -> (TripartiteGraph, Ontology) {
    let ontology = fixtures::bundled_ontology();
    let mut g = TripartiteGraph::new();
    g.plug_ontology(&ontology).unwrap();
    let cfg = ChunkingConfig::default();
    for (stem, text) in fixtures::CORPUS {
        g.add_document(&ingest_document(stem, stem, text, &cfg).unwrap()).unwrap();
    }
    for (stem, text) in fixtures::OBJECTS {
        g.add_object(ObjectNode::from_text(stem, text));
    }
    (g, ontology)
}

#[test]
fn criterion_6_structural_guarantees() {
    report(6, "schema, persistence and append-only extension", Duration::from_secs(10), || {
        let (mut g, ontology) = small_world();
        let object = fixtures::PETER;
        let chunk = g.chunks().next().ok_or("no chunks")?.chunk_id.clone();

        // No edge kind joins an object to a chunk.
        for kind in EdgeKind::ALL {
            for (s, t) in [(object, chunk.as_str()), (chunk.as_str(), object)] {
                let edge = if kind.is_annotated() {
                    Edge::annotated(kind, s, t, "x")
                } else {
                    Edge::structural(kind, s, t)
                };
                let result = g.insert_edge(edge);
                ensure!(
                    matches!(result, Err(GraphError::KindMismatch { .. })),
                    "{kind:?} {s} -> {t} accepted: {result:?}"
                );
            }
        }
        let forged = format!(
            "{}{{\"t\":\"object_concept\",\"source\":\"{object}\",\"target\":\"{chunk}\",\"summary\":\"x\"}}\n",
            g.to_jsonl()
        );
        ensure!(TripartiteGraph::from_jsonl(&forged).is_err(), "forged object-chunk edge loaded");

        run_annotation(&mut g, &ontology, &MockAnnotator, AnnotationScope::Both, Default::default())
            .map_err(|e| e.to_string())?;
        embed_edges(&mut g, &MockEmbedder::default(), false, 2).map_err(|e| e.to_string())?;
        ensure!(g.validate().is_empty(), "violations: {:?}", g.validate());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.jsonl");
        g.save(&path).map_err(|e| e.to_string())?;
        let loaded = TripartiteGraph::load(&path).map_err(|e| e.to_string())?;
        ensure!(loaded == g, "round trip changed the graph");

        // Append a document and re-run annotation.
        let before: Vec<Edge> = g.edges().cloned().collect();
        let extra = ingest_document(
            "renal",
            "renal",
            "# Kidney function\nChronic kidney disease is common in patients with long-standing hypertension and diabetes. \
             Blood pressure control slows the decline of kidney function.\n",
            &ChunkingConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        g.add_document(&extra).map_err(|e| e.to_string())?;
        let second = run_annotation(&mut g, &ontology, &MockAnnotator, AnnotationScope::Both, Default::default())
            .map_err(|e| e.to_string())?;
        ensure!(second.edges_created > 0, "new document produced no edges");
        for edge in &before {
            ensure!(g.edge(&edge.id()) == Some(edge), "edge {} changed", edge.id());
        }
        let new_edges: Vec<&Edge> = g.edges().filter(|e| !before.iter().any(|b| b.id() == e.id())).collect();
        for e in new_edges {
            let ok = if e.kind.is_annotated() {
                e.kind == EdgeKind::ConceptChunk && e.target.starts_with("renal:")
            } else {
                e.source.starts_with("renal") && e.target.starts_with("renal:")
            };
            ensure!(ok, "unexpected new edge {}", e.id());
        }
        Ok(())
    });
}

fn block(kind: BlockKind, concept: Option<&str>, text: &str, provenance: Option<(&str, &str, &str)>) -> PromptBlock {
    PromptBlock {
        kind,
        concept_id: concept.map(str::to_string),
        text: text.to_string(),
        provenance: provenance.map(|(d, h, c)| Provenance {
            doc_id: d.into(),
            heading: h.into(),
            chunk_id: c.into(),
        }),
    }
}

#[test]
fn criterion_7_prompt_contract() {
    report(7, "prompt layout matches the expected plans", Duration::from_secs(5), || {
        let template = QueryTemplate::new("Cross-examine the findings of {object_title}.");

        // Two concepts sharing a chunk.
        let g = fixtures::shared_chunk_graph();
        let ontology = parse_ontology(
            r#"{"version":"f","classes":[{"name":"Cardio","concepts":[{"name":"Heart rate"},{"name":"Blood pressure"}]}]}"#,
        )
        .unwrap();
        let cg = classified(&g, fixtures::PATIENT, &Thresholds::default())?;
        let plan = assemble_prompt(&g, &cg, &ontology, &template, &HeuristicCounter).map_err(|e| e.to_string())?;
        let s = |id: &str| g.edge(id).map(|e| e.summary().to_string()).unwrap_or_default();
        let hr_c0 = s("concept_chunk:cardio/heart-rate->doc:s0:c0");
        let hr_c1 = s("concept_chunk:cardio/heart-rate->doc:s0:c1");
        let bp_c0 = s("concept_chunk:cardio/blood-pressure->doc:s0:c0");
        let expected_blocks = vec![
            block(BlockKind::Query, None, "Cross-examine the findings of Patient A.", None),
            block(BlockKind::ObjectConceptSummary, Some(fixtures::HEART_RATE), "Heart rate 92 bpm.", None),
            block(BlockKind::ConceptChunkSummary, Some(fixtures::HEART_RATE), &hr_c0, Some(("doc", "Vital signs", "doc:s0:c0"))),
            block(BlockKind::ConceptChunkSummary, Some(fixtures::HEART_RATE), &hr_c1, Some(("doc", "Vital signs", "doc:s0:c1"))),
            block(BlockKind::ObjectConceptSummary, Some(fixtures::CARDIO_BP), "Blood pressure 165/95 mmHg.", None),
            block(BlockKind::ConceptChunkSummary, Some(fixtures::CARDIO_BP), &bp_c0, Some(("doc", "Vital signs", "doc:s0:c0"))),
        ];
        ensure!(hr_c0.contains("80 bpm") && hr_c1.contains("60 to 100 bpm"), "fixture summaries changed");
        let expected = PromptPlan::new(fixtures::PATIENT, expected_blocks, &HeuristicCounter);
        ensure!(plan == expected, "plan differs:\n{}\nexpected:\n{}", plan.to_json(), expected.to_json());
        ensure!(
            plan.evidence().all(|b| b.provenance.is_some()),
            "evidence block without provenance"
        );
        let text = render(&plan);
        ensure!(
            text.contains("[doc > Vital signs > doc:s0:c0]") && text.starts_with("Cross-examine the findings of Patient A."),
            "rendered text:\n{text}"
        );
        ensure!(plan.token_count == text.chars().count().div_ceil(4), "token count");

        // Single concept, single selected chunk.
        let g = fixtures::three_patient_graph();
        let ontology = parse_ontology(
            r#"{"version":"f","classes":[{"name":"Symptoms","concepts":[{"name":"Blood pressure"}]}]}"#,
        )
        .unwrap();
        let cg = classified(&g, fixtures::BARBARA, &Thresholds::default())?;
        let plan = assemble_prompt(&g, &cg, &ontology, &template, &HeuristicCounter).map_err(|e| e.to_string())?;
        let chunk_two = g.chunk(fixtures::CHUNK_II).ok_or("chunk II")?.text.clone();
        let expected = PromptPlan::new(
            fixtures::BARBARA,
            vec![
                block(BlockKind::Query, None, "Cross-examine the findings of Barbara Schmidt.", None),
                block(
                    BlockKind::ObjectConceptSummary,
                    Some(fixtures::BLOOD_PRESSURE),
                    "Home blood pressure readings are 170 - 180/90 mmHg.",
                    None,
                ),
                block(
                    BlockKind::ConceptChunkSummary,
                    Some(fixtures::BLOOD_PRESSURE),
                    &chunk_two,
                    Some(("guideline", "Blood pressure management", fixtures::CHUNK_II)),
                ),
            ],
            &HeuristicCounter,
        );
        ensure!(plan == expected, "plan differs:\n{}", plan.to_json());
        Ok(())
    });
}
