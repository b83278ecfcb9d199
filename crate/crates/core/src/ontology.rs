// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Pluggable ontologies: concept classes and their concepts.
//!
//! The on-disk form is JSON:
//!
//! ```json
//! {"version": "1", "classes": [
//!   {"name": "Symptoms", "concepts": [
//!     {"name": "Blood pressure", "description": "...", "keywords": ["mmHg"]}
//!   ]}
//! ]}
//! ```
//!
//! Identifiers are derived from names: a class id is the slugified class
//! name, a concept id is `class-slug/concept-slug`. Declaration order is
//! preserved everywhere, since it drives concept ordering in prompts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::slugify;

#[derive(Debug, thiserror::Error)]
pub enum OntologyError {
    #[error("ontology syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate concept `{0}`")]
    DuplicateConcept(String),
    #[error("duplicate concept class `{0}`")]
    DuplicateClass(String),
    #[error("concept class `{0}` has no concepts")]
    EmptyClass(String),
    #[error("name `{0}` does not produce a usable identifier")]
    InvalidName(String),
    #[error("concept `{0}` is not attached to a class consistently")]
    DanglingConcept(String),
    #[error("reading ontology: {0}")]
    Io(#[from] std::io::Error),
}

/// A single invariant violation found by [`validate_ontology`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyClass(String),
    DuplicateClass(String),
    DuplicateConcept(String),
    InvalidName(String),
    DanglingConcept(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyClass(id) => write!(f, "empty class `{id}`"),
            Violation::DuplicateClass(id) => write!(f, "duplicate class `{id}`"),
            Violation::DuplicateConcept(id) => write!(f, "duplicate concept `{id}`"),
            Violation::InvalidName(name) => write!(f, "invalid name `{name}`"),
            Violation::DanglingConcept(id) => write!(f, "dangling concept `{id}`"),
        }
    }
}

impl From<Violation> for OntologyError {
    fn from(v: Violation) -> Self {
        match v {
            Violation::EmptyClass(id) => OntologyError::EmptyClass(id),
            Violation::DuplicateClass(id) => OntologyError::DuplicateClass(id),
            Violation::DuplicateConcept(id) => OntologyError::DuplicateConcept(id),
            Violation::InvalidName(name) => OntologyError::InvalidName(name),
            Violation::DanglingConcept(id) => OntologyError::DanglingConcept(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptClass {
    pub class_id: String,
    pub name: String,
    pub concept_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: String,
    pub class_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Match keywords. Only the mock annotator reads these.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontology {
    pub version: String,
    pub classes: Vec<ConceptClass>,
    /// All concepts, flattened in declaration order.
    pub concepts: Vec<Concept>,
}

impl Ontology {
    pub fn concept(&self, concept_id: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.concept_id == concept_id)
    }

    pub fn class(&self, class_id: &str) -> Option<&ConceptClass> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    /// Concepts in file declaration order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter()
    }

    /// Position of each concept in declaration order.
    pub fn declaration_rank(&self) -> BTreeMap<&str, usize> {
        self.concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.concept_id.as_str(), i))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = OntologyFile {
            version: self.version.clone(),
            classes: self
                .classes
                .iter()
                .map(|class| ClassFile {
                    name: class.name.clone(),
                    concepts: class
                        .concept_ids
                        .iter()
                        .filter_map(|id| self.concept(id))
                        .map(|c| ConceptFile {
                            name: c.name.clone(),
                            description: c.description.clone(),
                            keywords: if c.keywords.is_empty() {
                                None
                            } else {
                                Some(c.keywords.clone())
                            },
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("ontology serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyFile {
    version: String,
    classes: Vec<ClassFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassFile {
    name: String,
    concepts: Vec<ConceptFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConceptFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keywords: Option<Vec<String>>,
}

/// Parses and validates an ontology file.
pub fn parse_ontology(contents: &str) -> Result<Ontology, OntologyError> {
    let file: OntologyFile =
        serde_json::from_str(contents).map_err(|e| OntologyError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;

    let mut classes = Vec::with_capacity(file.classes.len());
    let mut concepts = Vec::new();
    for class in file.classes {
        let class_id = slugify(&class.name);
        if class_id.is_empty() {
            return Err(OntologyError::InvalidName(class.name));
        }
        let mut concept_ids = Vec::with_capacity(class.concepts.len());
        for concept in class.concepts {
            let slug = slugify(&concept.name);
            if slug.is_empty() {
                return Err(OntologyError::InvalidName(concept.name));
            }
            let concept_id = format!("{class_id}/{slug}");
            concept_ids.push(concept_id.clone());
            concepts.push(Concept {
                concept_id,
                class_id: class_id.clone(),
                name: concept.name,
                description: concept.description,
                keywords: concept.keywords.unwrap_or_default(),
            });
        }
        classes.push(ConceptClass {
            class_id,
            name: class.name,
            concept_ids,
        });
    }

    let ontology = Ontology {
        version: file.version,
        classes,
        concepts,
    };
    match validate_ontology(&ontology).into_iter().next() {
        Some(violation) => Err(violation.into()),
        None => Ok(ontology),
    }
}

pub fn load_ontology(path: &Path) -> Result<Ontology, OntologyError> {
    parse_ontology(&std::fs::read_to_string(path)?)
}

/// Checks every ontology invariant; an empty result means valid.
pub fn validate_ontology(ontology: &Ontology) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut class_names = BTreeSet::new();
    let mut class_ids = BTreeSet::new();
    for class in &ontology.classes {
        if class.class_id.is_empty() || class.name.trim().is_empty() {
            violations.push(Violation::InvalidName(class.name.clone()));
        }
        if !class_ids.insert(class.class_id.as_str()) || !class_names.insert(class.name.as_str()) {
            violations.push(Violation::DuplicateClass(class.class_id.clone()));
        }
        if class.concept_ids.is_empty() {
            violations.push(Violation::EmptyClass(class.class_id.clone()));
        }
    }

    // Concept ids must be unique across the concept table and across class
    // membership lists.
    let mut seen_concepts = BTreeSet::new();
    for concept in &ontology.concepts {
        if concept.name.trim().is_empty() {
            violations.push(Violation::InvalidName(concept.name.clone()));
        }
        if !seen_concepts.insert(concept.concept_id.as_str()) {
            violations.push(Violation::DuplicateConcept(concept.concept_id.clone()));
        }
    }
    let mut membership: BTreeMap<&str, &str> = BTreeMap::new();
    for class in &ontology.classes {
        let mut names_in_class = BTreeSet::new();
        for id in &class.concept_ids {
            if let Some(owner) = membership.insert(id.as_str(), class.class_id.as_str()) {
                let reported = Violation::DuplicateConcept(id.clone());
                if owner != class.class_id || !violations.contains(&reported) {
                    violations.push(reported);
                }
                continue;
            }
            match ontology.concept(id) {
                Some(concept) if concept.class_id == class.class_id => {
                    if !names_in_class.insert(concept.name.as_str()) {
                        violations.push(Violation::DuplicateConcept(id.clone()));
                    }
                }
                _ => violations.push(Violation::DanglingConcept(id.clone())),
            }
        }
    }
    for concept in &ontology.concepts {
        if !membership.contains_key(concept.concept_id.as_str()) {
            violations.push(Violation::DanglingConcept(concept.concept_id.clone()));
        }
    }
    violations.dedup();
    violations
}
