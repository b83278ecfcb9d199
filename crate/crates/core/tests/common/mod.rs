// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Strategies and property bodies shared by the property suite and the
//! acceptance target.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use tripartite_core::classify::{classify, selected_pairs, ActivatedBy, ClassificationGraph, ClassificationNode, Thresholds};
use tripartite_core::scoring::{cosine, ConceptDistribution};

pub const CASES: u32 = 1000;

pub fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-6))
}

pub fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..32).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d), 1e-3f64..1e3))
}

pub fn cosine_props((u, v, scale): (Vec<f64>, Vec<f64>, f64)) -> Result<(), TestCaseError> {
    let c = cosine(&u, &v).unwrap();
    prop_assert!((-1.0..=1.0).contains(&c));
    prop_assert_eq!(c, cosine(&v, &u).unwrap());
    let scaled: Vec<f64> = u.iter().map(|x| x * scale).collect();
    prop_assert!((cosine(&scaled, &v).unwrap() - c).abs() < 1e-9);
    prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
    Ok(())
}

pub fn samples_and_probes() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(prop_oneof![-1.0f64..1.0, (0u8..10).prop_map(|k| k as f64 / 10.0)], 1..40),
        prop::collection::vec(-1.5f64..1.5, 1..20),
    )
}

pub fn cdf_props((samples, mut probes): (Vec<f64>, Vec<f64>)) -> Result<(), TestCaseError> {
    let n = samples.len();
    let dist = ConceptDistribution::from_samples("c", samples.clone()).unwrap();
    probes.extend(samples.iter().copied());
    probes.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    for w in probes {
        let p = dist.probability(w);
        prop_assert!(p >= prev, "not monotone at {}", w);
        prev = p;
        let k = p * n as f64;
        prop_assert!((k - k.round()).abs() < 1e-9, "{} is not k/{}", p, n);
        // Direct count as the oracle.
        let count = samples.iter().filter(|&&s| s <= w).count();
        prop_assert_eq!(p, count as f64 / n as f64);
    }
    let max = samples.iter().copied().fold(f64::MIN, f64::max);
    prop_assert_eq!(dist.probability(max), 1.0);
    Ok(())
}

/// Random classification graph with up to `max_nodes` distinct
/// (concept, chunk) nodes over small id alphabets so chunks are shared.
pub fn class_graph(max_nodes: usize) -> impl Strategy<Value = ClassificationGraph> {
    let p = prop_oneof![0.0f64..=1.0, (0u8..=10).prop_map(|k| k as f64 / 10.0)];
    prop::collection::vec((0u8..4, 0u8..4, p), 0..=max_nodes).prop_map(|raw| {
        let mut seen = BTreeSet::new();
        let nodes = raw
            .into_iter()
            .filter(|(c, t, _)| seen.insert((*c, *t)))
            .map(|(c, t, p)| ClassificationNode::new(format!("c{c}"), format!("t{t}"), p, p))
            .collect();
        ClassificationGraph::from_nodes("o", nodes)
    })
}

pub fn threshold() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..=1.0, (1u8..=10).prop_map(|k| k as f64 / 10.0)]
}

pub fn selected_set(cg: &ClassificationGraph, alpha: f64, beta: f64) -> BTreeSet<(String, String)> {
    let out = classify(cg, &Thresholds::new(alpha, beta).unwrap());
    selected_pairs(&out)
        .into_iter()
        .map(|p| (p.concept_id, p.chunk_id))
        .collect()
}

/// The two-pass rule evaluated directly on (concept, chunk, p) triples,
/// without the interaction edge list.
pub fn brute_force(nodes: &[ClassificationNode], alpha: f64, beta: f64) -> Vec<ActivatedBy> {
    nodes
        .iter()
        .map(|j| {
            if j.p > alpha {
                return ActivatedBy::Alpha;
            }
            let anchored = nodes
                .iter()
                .any(|i| i.chunk_id == j.chunk_id && i.concept_id != j.concept_id && i.p > alpha);
            if j.p > beta && anchored {
                ActivatedBy::Beta
            } else {
                ActivatedBy::None
            }
        })
        .collect()
}

pub fn alpha_monotone((cg, a, b, beta): (ClassificationGraph, f64, f64, f64)) -> Result<(), TestCaseError> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    prop_assert!(selected_set(&cg, hi, beta).is_subset(&selected_set(&cg, lo, beta)));
    Ok(())
}

pub fn beta_monotone((cg, alpha, a, b): (ClassificationGraph, f64, f64, f64)) -> Result<(), TestCaseError> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    prop_assert!(selected_set(&cg, alpha, hi).is_subset(&selected_set(&cg, alpha, lo)));
    Ok(())
}

pub fn collapse((cg, a, b): (ClassificationGraph, f64, f64)) -> Result<(), TestCaseError> {
    let (alpha, beta) = if a <= b { (a, b) } else { (b, a) };
    let out = classify(&cg, &Thresholds::new(alpha, beta).unwrap());
    let alpha_only: BTreeSet<usize> = cg
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.p > alpha)
        .map(|(i, _)| i)
        .collect();
    let selected: BTreeSet<usize> = out
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.state == 1)
        .map(|(i, _)| i)
        .collect();
    prop_assert_eq!(selected, alpha_only);
    prop_assert!(out.nodes.iter().all(|n| n.activated_by != ActivatedBy::Beta));
    Ok(())
}

pub fn oracle_equivalence((cg, alpha, beta): (ClassificationGraph, f64, f64)) -> Result<(), TestCaseError> {
    let out = classify(&cg, &Thresholds::new(alpha, beta).unwrap());
    let got: Vec<ActivatedBy> = out.nodes.iter().map(|n| n.activated_by).collect();
    prop_assert_eq!(got, brute_force(&cg.nodes, alpha, beta));
    for n in &out.nodes {
        prop_assert_eq!(n.state == 1, n.activated_by != ActivatedBy::None);
    }
    Ok(())
}

/// Reversing the node list and remapping edges does not change any
/// node's outcome.
pub fn order_independence((cg, alpha, beta): (ClassificationGraph, f64, f64)) -> Result<(), TestCaseError> {
    let th = Thresholds::new(alpha, beta).unwrap();
    let n = cg.nodes.len();
    let reversed = ClassificationGraph {
        object_id: cg.object_id.clone(),
        nodes: cg.nodes.iter().rev().cloned().collect(),
        interaction_edges: cg
            .interaction_edges
            .iter()
            .map(|&(i, j)| (n - 1 - j, n - 1 - i))
            .collect(),
        thresholds: None,
    };
    let key = |g: &ClassificationGraph| -> BTreeMap<(String, String), ActivatedBy> {
        classify(g, &th)
            .nodes
            .into_iter()
            .map(|x| ((x.concept_id, x.chunk_id), x.activated_by))
            .collect()
    };
    prop_assert_eq!(key(&cg), key(&reversed));
    Ok(())
}

pub fn graph_and_pair() -> impl Strategy<Value = (ClassificationGraph, f64, f64)> {
    (class_graph(12), threshold(), threshold())
}

pub fn graph_and_triple() -> impl Strategy<Value = (ClassificationGraph, f64, f64, f64)> {
    (class_graph(12), threshold(), threshold(), threshold())
}
