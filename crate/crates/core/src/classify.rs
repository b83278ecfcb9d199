// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Per-object classification graph and the α/β inclusion rules.
//!
//! For an object `o`, every (concept, chunk) pair reachable through
//! `o→c→t` becomes a binary node. Two nodes interact when they sit on the
//! same chunk under different concepts. Classification runs two passes:
//!
//! 1. α: a node is selected when `P_c(w) > α`.
//! 2. β: an unselected node is selected when `P_c(w) > β` and one of its
//!    interaction neighbours was selected in the α pass.
//!
//! The β pass does not propagate from β-selected nodes unless
//! [`Thresholds::cascade`] is set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeKind, NodeKind, NodeRef, TripartiteGraph};
use crate::scoring::{score, ConceptDistribution, ScoringError};

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("threshold {name} = {value} must lie in (0, 1]")]
    InvalidThreshold { name: String, value: f64 },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("no score distribution for concept `{0}`")]
    MissingDistribution(String),
    #[error("object `{0}` has not been classified")]
    UnclassifiedObject(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub alpha: f64,
    pub beta: f64,
    /// Let β-selected nodes activate further neighbours. Off by default.
    #[serde(default)]
    pub cascade: bool,
    /// Per-concept β values that replace the global one.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub beta_overrides: BTreeMap<String, f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            cascade: false,
            beta_overrides: BTreeMap::new(),
        }
    }
}

fn check_unit(name: &str, value: f64) -> Result<(), ClassifyError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(ClassifyError::InvalidThreshold {
            name: name.to_string(),
            value,
        })
    }
}

impl Thresholds {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ClassifyError> {
        let th = Self {
            alpha,
            beta,
            ..Self::default()
        };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        check_unit("alpha", self.alpha)?;
        check_unit("beta", self.beta)?;
        for (concept, &b) in &self.beta_overrides {
            check_unit(&format!("beta[{concept}]"), b)?;
        }
        Ok(())
    }

    /// Non-fatal configuration problems.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.beta > self.alpha {
            out.push(format!(
                "beta ({}) exceeds alpha ({}); the beta rule can never add a node",
                self.beta, self.alpha
            ));
        }
        for (concept, &b) in &self.beta_overrides {
            if b > self.alpha {
                out.push(format!("beta override for `{concept}` ({b}) exceeds alpha ({})", self.alpha));
            }
        }
        out
    }

    pub fn beta_for(&self, concept_id: &str) -> f64 {
        self.beta_overrides.get(concept_id).copied().unwrap_or(self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivatedBy {
    Alpha,
    Beta,
    None,
}

impl ActivatedBy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationNode {
    pub concept_id: String,
    pub chunk_id: String,
    pub w: f64,
    pub p: f64,
    pub state: u8,
    pub activated_by: ActivatedBy,
}

impl ClassificationNode {
    pub fn new(concept_id: impl Into<String>, chunk_id: impl Into<String>, w: f64, p: f64) -> Self {
        Self {
            concept_id: concept_id.into(),
            chunk_id: chunk_id.into(),
            w,
            p,
            state: 0,
            activated_by: ActivatedBy::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationGraph {
    pub object_id: String,
    pub nodes: Vec<ClassificationNode>,
    /// Index pairs `(i, j)` with `i < j`, sorted.
    pub interaction_edges: Vec<(usize, usize)>,
    /// Set once [`classify`] has run.
    pub thresholds: Option<Thresholds>,
}

impl ClassificationGraph {
    /// Builds a graph from explicit nodes, sorting them by
    /// (concept, chunk) and deriving the shared-chunk edges.
    pub fn from_nodes(object_id: impl Into<String>, mut nodes: Vec<ClassificationNode>) -> Self {
        nodes.sort_by(|a, b| (&a.concept_id, &a.chunk_id).cmp(&(&b.concept_id, &b.chunk_id)));
        let interaction_edges = interaction_edges(&nodes);
        Self {
            object_id: object_id.into(),
            nodes,
            interaction_edges,
            thresholds: None,
        }
    }

    pub fn is_classified(&self) -> bool {
        self.thresholds.is_some()
    }

    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(i, j) in &self.interaction_edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn report(&self) -> ClassificationReport {
        ClassificationReport {
            object_id: self.object_id.clone(),
            thresholds: self.thresholds.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| ReportNode {
                    concept: n.concept_id.clone(),
                    chunk: n.chunk_id.clone(),
                    w: n.w,
                    p: n.p,
                    state: n.state,
                    activated_by: n.activated_by,
                })
                .collect(),
            interaction_edges: self.interaction_edges.clone(),
        }
    }
}

fn interaction_edges(nodes: &[ClassificationNode]) -> Vec<(usize, usize)> {
    let mut by_chunk: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        by_chunk.entry(n.chunk_id.as_str()).or_default().push(i);
    }
    let mut edges = BTreeSet::new();
    for members in by_chunk.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if nodes[i].concept_id != nodes[j].concept_id {
                    edges.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Nodes for every (c, t) with `o→c` and `c→t` edges, with their scores and
/// CDF values. States start at 0.
pub fn build_classification_graph(
    graph: &TripartiteGraph,
    distributions: &BTreeMap<String, ConceptDistribution>,
    object_id: &str,
) -> Result<ClassificationGraph, ClassifyError> {
    let object = NodeRef::new(NodeKind::Object, object_id);
    if !graph.contains(&object) {
        return Err(ClassifyError::UnknownObject(object_id.to_string()));
    }
    let mut nodes = Vec::new();
    for (_, concept) in graph.neighbors(&object, EdgeKind::ObjectConcept).map_err(ScoringError::from)? {
        let chunks = graph
            .neighbors(&concept, EdgeKind::ConceptChunk)
            .map_err(ScoringError::from)?;
        if chunks.is_empty() {
            continue;
        }
        let dist = distributions
            .get(&concept.id)
            .ok_or_else(|| ClassifyError::MissingDistribution(concept.id.clone()))?;
        for (_, chunk) in chunks {
            let w = score(graph, object_id, &concept.id, &chunk.id)?;
            nodes.push(ClassificationNode::new(&concept.id, &chunk.id, w, dist.probability(w)));
        }
    }
    Ok(ClassificationGraph::from_nodes(object_id, nodes))
}

/// Returns a copy of `cg` with states assigned under `th`.
pub fn classify(cg: &ClassificationGraph, th: &Thresholds) -> ClassificationGraph {
    let mut out = cg.clone();
    for n in &mut out.nodes {
        if n.p > th.alpha {
            n.state = 1;
            n.activated_by = ActivatedBy::Alpha;
        } else {
            n.state = 0;
            n.activated_by = ActivatedBy::None;
        }
    }
    let adj = out.neighbours();
    loop {
        // Decide the whole pass against a frozen snapshot so the result does
        // not depend on node order.
        let snapshot: Vec<ActivatedBy> = out.nodes.iter().map(|n| n.activated_by).collect();
        let anchor = |i: usize| match snapshot[i] {
            ActivatedBy::Alpha => true,
            ActivatedBy::Beta => th.cascade,
            ActivatedBy::None => false,
        };
        let mut changed = false;
        for (j, n) in out.nodes.iter_mut().enumerate() {
            if n.state == 0 && n.p > th.beta_for(&n.concept_id) && adj[j].iter().any(|&i| anchor(i)) {
                n.state = 1;
                n.activated_by = ActivatedBy::Beta;
                changed = true;
            }
        }
        if !th.cascade || !changed {
            break;
        }
    }
    out.thresholds = Some(th.clone());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedPair {
    pub concept_id: String,
    pub chunk_id: String,
    pub activated_by: ActivatedBy,
}

/// The state-1 nodes ordered by concept, then α before β, then chunk.
pub fn selected_pairs(cg: &ClassificationGraph) -> Vec<SelectedPair> {
    let mut out: Vec<SelectedPair> = cg
        .nodes
        .iter()
        .filter(|n| n.state == 1)
        .map(|n| SelectedPair {
            concept_id: n.concept_id.clone(),
            chunk_id: n.chunk_id.clone(),
            activated_by: n.activated_by,
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.concept_id, a.activated_by, &a.chunk_id).cmp(&(&b.concept_id, b.activated_by, &b.chunk_id))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportNode {
    pub concept: String,
    pub chunk: String,
    pub w: f64,
    pub p: f64,
    pub state: u8,
    pub activated_by: ActivatedBy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub object_id: String,
    pub thresholds: Option<Thresholds>,
    pub nodes: Vec<ReportNode>,
    pub interaction_edges: Vec<(usize, usize)>,
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
