// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic corpus and object generator with planted concept
//! mentions.
//!
//! Every concept gets a unique marker phrase (`"<concept name> <code>"`).
//! Each object states a finding sentence for each of its planted concepts;
//! the same finding sentence is planted into one or two corpus chunks,
//! which become the gold chunks for that (object, concept) pair. Every
//! concept is additionally mentioned in a few distractor chunks with other
//! qualifiers. All remaining text comes from a fixed filler vocabulary.
//!
//! Each generated paragraph holds 650 to 1150 characters, so with the
//! default chunk size every paragraph is exactly one chunk and gold chunk
//! ids can be computed without ingesting.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::chunk_id;
use crate::ontology::Ontology;

#[derive(Debug, thiserror::Error)]
pub enum SyngenError {
    #[error("marker `{0}` is a substring of marker `{1}`")]
    MarkerCollision(String, String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Smallest paragraph; two of these exceed the default chunk size.
pub const MIN_PARAGRAPH_CHARS: usize = 650;
/// Largest paragraph; fits into one default chunk.
pub const MAX_PARAGRAPH_CHARS: usize = 1150;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantPlan {
    pub seed: u64,
    pub docs: usize,
    /// Inclusive range.
    pub sections_per_doc: (usize, usize),
    pub chunks_per_section: (usize, usize),
    pub objects: usize,
    pub concepts_per_object: (usize, usize),
    /// Gold chunks per (object, concept) pair.
    pub chunks_per_pair: (usize, usize),
    /// Distractor mentions per concept.
    pub distractors_per_concept: (usize, usize),
    /// Concept id to marker phrase. Missing entries are generated.
    #[serde(default)]
    pub marker_map: BTreeMap<String, String>,
}

impl Default for PlantPlan {
    fn default() -> Self {
        Self {
            seed: 42,
            docs: 6,
            sections_per_doc: (20, 42),
            chunks_per_section: (1, 2),
            objects: 3,
            concepts_per_object: (7, 15),
            chunks_per_pair: (1, 2),
            distractors_per_concept: (1, 3),
            marker_map: BTreeMap::new(),
        }
    }
}

fn check_range(name: &str, (lo, hi): (usize, usize), min: usize) -> Result<(), SyngenError> {
    if lo < min || lo > hi {
        return Err(SyngenError::InvalidPlan(format!("{name} range ({lo}, {hi})")));
    }
    Ok(())
}

impl PlantPlan {
    pub fn validate(&self, concepts: usize) -> Result<(), SyngenError> {
        if self.docs == 0 {
            return Err(SyngenError::InvalidPlan("at least one document is required".into()));
        }
        check_range("sections_per_doc", self.sections_per_doc, 1)?;
        check_range("chunks_per_section", self.chunks_per_section, 1)?;
        check_range("concepts_per_object", self.concepts_per_object, 0)?;
        check_range("chunks_per_pair", self.chunks_per_pair, 1)?;
        check_range("distractors_per_concept", self.distractors_per_concept, 0)?;
        if self.concepts_per_object.1 > concepts {
            return Err(SyngenError::InvalidPlan(format!(
                "{} concepts per object requested, ontology has {concepts}",
                self.concepts_per_object.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldConcept {
    pub concept_id: String,
    pub chunks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldObject {
    pub object_id: String,
    pub concepts: Vec<GoldConcept>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gold {
    pub objects: Vec<GoldObject>,
    /// Concept id to marker phrase.
    pub markers: BTreeMap<String, String>,
}

impl Gold {
    pub fn object(&self, object_id: &str) -> Option<&GoldObject> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    /// Marker phrases of the concepts planted in `object_id`.
    pub fn markers_for(&self, object_id: &str) -> BTreeMap<String, String> {
        self.object(object_id)
            .into_iter()
            .flat_map(|o| &o.concepts)
            .filter_map(|c| Some((c.concept_id.clone(), self.markers.get(&c.concept_id)?.clone())))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gold serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    /// (file stem, contents)
    pub documents: Vec<(String, String)>,
    pub objects: Vec<(String, String)>,
    /// The input ontology with each concept's keywords replaced by its marker.
    pub ontology: Ontology,
    pub gold: Gold,
}

impl Generated {
    /// Writes `corpus/`, `objects/`, `ontology.json` and `gold.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SyngenError> {
        let write = |path: &Path, contents: &str| {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| SyngenError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(path, contents).map_err(|source| SyngenError::Io {
                path: path.to_path_buf(),
                source,
            })
        };
        for (stem, text) in &self.documents {
            write(&dir.join("corpus").join(format!("{stem}.txt")), text)?;
        }
        for (stem, text) in &self.objects {
            write(&dir.join("objects").join(format!("{stem}.txt")), text)?;
        }
        write(&dir.join("ontology.json"), &self.ontology.to_json())?;
        write(&dir.join("gold.json"), &self.gold.to_json())?;
        Ok(())
    }
}

const FILLER: &[&str] = &[
    "lorem", "ipsum", "dolor", "sit", "amet", "consectetur", "adipiscing", "elit", "sed", "do",
    "eiusmod", "tempor", "incididunt", "ut", "labore", "et", "dolore", "magna", "aliqua", "enim",
    "ad", "minim", "veniam", "quis", "nostrud", "exercitation", "ullamco", "laboris", "nisi",
    "aliquip", "ex", "ea", "commodo", "consequat", "duis", "aute", "irure", "in", "reprehenderit",
    "voluptate", "velit", "esse", "cillum", "fugiat", "nulla", "pariatur", "excepteur", "sint",
    "occaecat", "cupidatat", "non", "proident", "sunt", "culpa", "qui", "officia", "deserunt",
    "mollit", "anim", "id", "est", "laborum",
];

const QUALIFIERS: &[&str] = &[
    "persistent", "intermittent", "nocturnal", "postprandial", "progressive", "stable", "mild",
    "severe", "recurrent", "isolated", "bilateral", "unilateral", "exertional", "resting",
    "transient", "chronic", "acute", "borderline", "marked", "episodic", "seasonal", "morning",
    "evening", "refractory", "responsive", "asymptomatic", "symptomatic", "familial", "sporadic",
    "early", "late", "fluctuating", "sustained", "declining", "rising", "treated", "untreated",
    "documented", "reported", "measured",
];

const NAMES: &[&str] = &[
    "Anna Keller", "Bruno Vogt", "Clara Brandt", "David Roth", "Elena Schulz", "Felix Winter",
    "Greta Hahn", "Hugo Lang", "Ida Krause", "Jonas Weber", "Karin Frank", "Lukas Berger",
];

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pick_in(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| {
            [
                *CONSONANTS.choose(rng).unwrap() as char,
                *VOWELS.choose(rng).unwrap() as char,
            ]
        })
        .collect()
}

fn capitalise(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn filler_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(8..=16);
    let words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect();
    format!("{}.", capitalise(&words.join(" ")))
}

fn heading(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=4);
    let words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect();
    capitalise(&words.join(" "))
}

fn finding_sentence(marker: &str, qualifiers: &[&str]) -> String {
    format!(
        "Findings of {marker} were {}, {} and {}.",
        qualifiers[0], qualifiers[1], qualifiers[2]
    )
}

fn qualifiers(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    QUALIFIERS.choose_multiple(rng, 3).copied().collect()
}

/// Filler sentences with `planted` inserted at random positions, sized
/// to land in [MIN_PARAGRAPH_CHARS, MAX_PARAGRAPH_CHARS].
fn paragraph(rng: &mut ChaCha8Rng, planted: &[String]) -> String {
    let target = rng.random_range(MIN_PARAGRAPH_CHARS..=MAX_PARAGRAPH_CHARS);
    let planted_len: usize = planted.iter().map(|s| s.len() + 1).sum();
    let mut sentences: Vec<String> = Vec::new();
    let mut len = planted_len;
    loop {
        let s = filler_sentence(rng);
        if len + s.len() + 1 > MAX_PARAGRAPH_CHARS {
            if len >= MIN_PARAGRAPH_CHARS {
                break;
            }
            continue;
        }
        len += s.len() + 1;
        sentences.push(s);
        if len >= target {
            break;
        }
    }
    for p in planted {
        let at = rng.random_range(0..=sentences.len());
        sentences.insert(at, p.clone());
    }
    sentences.join(" ")
}

/// Checks that no marker contains another (case-insensitive).
pub fn check_markers(markers: &BTreeMap<String, String>) -> Result<(), SyngenError> {
    let lowered: Vec<String> = markers.values().map(|m| m.to_lowercase()).collect();
    for (i, a) in lowered.iter().enumerate() {
        for (j, b) in lowered.iter().enumerate() {
            if i != j && b.contains(a.as_str()) {
                let originals: Vec<&String> = markers.values().collect();
                return Err(SyngenError::MarkerCollision(originals[i].clone(), originals[j].clone()));
            }
        }
    }
    Ok(())
}

struct ChunkSlot {
    doc: usize,
    section: usize,
    ordinal: usize,
    planted: Vec<String>,
}

/// Generates corpus, objects, marker ontology and gold annotations.
pub fn generate(plan: &PlantPlan, ontology: &Ontology) -> Result<Generated, SyngenError> {
    plan.validate(ontology.concepts.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);

    let mut markers = plan.marker_map.clone();
    let mut codes = BTreeSet::new();
    for concept in ontology.concepts() {
        if markers.contains_key(&concept.concept_id) {
            continue;
        }
        let code = loop {
            let code = pseudo_word(&mut rng, 3);
            if codes.insert(code.clone()) {
                break code;
            }
        };
        markers.insert(concept.concept_id.clone(), format!("{} {code}", concept.name.to_lowercase()));
    }
    check_markers(&markers)?;

    // Corpus layout.
    let mut slots = Vec::new();
    let mut doc_sections = Vec::with_capacity(plan.docs);
    for doc in 0..plan.docs {
        let sections = pick_in(&mut rng, plan.sections_per_doc);
        let mut per_section = Vec::with_capacity(sections);
        for section in 0..sections {
            let chunks = pick_in(&mut rng, plan.chunks_per_section);
            for ordinal in 0..chunks {
                slots.push(ChunkSlot {
                    doc,
                    section,
                    ordinal,
                    planted: Vec::new(),
                });
            }
            per_section.push(chunks);
        }
        doc_sections.push(per_section);
    }
    let doc_id = |doc: usize| format!("guideline-{:02}", doc + 1);
    let slot_id = |s: &ChunkSlot| chunk_id(&doc_id(s.doc), s.section, s.ordinal);

    // Least-loaded random slot, so no chunk carries many plantings.
    let place = |rng: &mut ChaCha8Rng, slots: &mut Vec<ChunkSlot>, sentence: String, avoid: &BTreeSet<usize>| {
        let min_load = slots
            .iter()
            .enumerate()
            .filter(|(i, _)| !avoid.contains(i))
            .map(|(_, s)| s.planted.len())
            .min()
            .unwrap_or(0);
        let candidates: Vec<usize> = (0..slots.len())
            .filter(|i| !avoid.contains(i) && slots[*i].planted.len() == min_load)
            .collect();
        let idx = *candidates.choose(rng).expect("corpus has free chunks");
        slots[idx].planted.push(sentence);
        idx
    };

    // Objects and their findings.
    let concept_ids: Vec<&str> = ontology.concepts().map(|c| c.concept_id.as_str()).collect();
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(&mut rng);
    let mut objects = Vec::with_capacity(plan.objects);
    let mut gold_objects = Vec::with_capacity(plan.objects);
    for o in 0..plan.objects {
        let object_id = format!("patient-{:02}", o + 1);
        let name = names[o % names.len()];
        let k = pick_in(&mut rng, plan.concepts_per_object);
        let mut chosen: Vec<&str> = concept_ids.choose_multiple(&mut rng, k).copied().collect();
        chosen.sort_by_key(|id| concept_ids.iter().position(|c| c == id));

        let mut findings = Vec::with_capacity(chosen.len());
        let mut gold_concepts = Vec::with_capacity(chosen.len());
        for concept in chosen {
            let sentence = finding_sentence(&markers[concept], &qualifiers(&mut rng));
            let n = pick_in(&mut rng, plan.chunks_per_pair);
            let mut used = BTreeSet::new();
            for _ in 0..n {
                used.insert(place(&mut rng, &mut slots, sentence.clone(), &used));
            }
            let mut chunks: Vec<String> = used.iter().map(|&i| slot_id(&slots[i])).collect();
            chunks.sort();
            gold_concepts.push(GoldConcept {
                concept_id: concept.to_string(),
                chunks,
            });
            findings.push(sentence);
        }
        gold_concepts.sort_by(|a, b| a.concept_id.cmp(&b.concept_id));
        gold_objects.push(GoldObject {
            object_id: object_id.clone(),
            concepts: gold_concepts,
        });

        let mut body = Vec::new();
        body.push(format!("{name} presented for a routine review."));
        for finding in findings {
            body.push(filler_sentence(&mut rng));
            body.push(finding);
        }
        body.push(filler_sentence(&mut rng));
        objects.push((object_id, format!("# {name}\n\n{}\n", body.join(" "))));
    }

    for concept in &concept_ids {
        let n = pick_in(&mut rng, plan.distractors_per_concept);
        let mut used = BTreeSet::new();
        for _ in 0..n {
            let sentence = finding_sentence(&markers[*concept], &qualifiers(&mut rng));
            used.insert(place(&mut rng, &mut slots, sentence, &used));
        }
    }

    // Render documents.
    let mut documents = Vec::with_capacity(plan.docs);
    let mut cursor = 0;
    for (doc, sections) in doc_sections.iter().enumerate() {
        let mut text = String::new();
        for &chunks in sections {
            text.push_str(&format!("# {}\n\n", heading(&mut rng)));
            for _ in 0..chunks {
                text.push_str(&paragraph(&mut rng, &slots[cursor].planted));
                text.push_str("\n\n");
                cursor += 1;
            }
        }
        documents.push((doc_id(doc), text));
    }

    let mut marker_ontology = ontology.clone();
    for concept in &mut marker_ontology.concepts {
        concept.keywords = vec![markers[&concept.concept_id].clone()];
    }

    Ok(Generated {
        documents,
        objects,
        ontology: marker_ontology,
        gold: Gold {
            objects: gold_objects,
            markers,
        },
    })
}
