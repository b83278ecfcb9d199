// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Lexical graph ingestion: document → sections → chunks, with a successor
//! chain over chunks in reading order.
//!
//! Input documents are plain UTF-8 text. A line starting with `#` is a
//! heading; only depth-1 headings (`# Title`) open a new section, deeper
//! headings stay in the section body. Section bodies are packed into chunks
//! at sentence boundaries, up to [`ChunkingConfig::max_chunk_chars`].
//! A chunk continues across a blank-line paragraph break only when the
//! whole next paragraph still fits, so paragraph structure is kept where
//! the size budget allows it.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::TripartiteGraph;
use crate::text::sentence_spans;

pub const DEFAULT_MAX_CHUNK_CHARS: usize = 1200;
pub const MIN_MAX_CHUNK_CHARS: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("document `{0}` has no content")]
    EmptySource(String),
    #[error("document `{doc_id}`: heading marker without text on line {line}")]
    MalformedHeading { doc_id: String, line: usize },
    #[error("max_chunk_chars must be at least {MIN_MAX_CHUNK_CHARS}, got {0}")]
    InvalidConfig(usize),
    #[error("unknown chunk `{0}`")]
    UnknownChunk(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub max_chunk_chars: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_chunk_chars: DEFAULT_MAX_CHUNK_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentNode {
    pub doc_id: String,
    pub title: String,
    pub source_uri: String,
    pub section_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionNode {
    pub section_id: String,
    pub doc_id: String,
    pub heading: String,
    pub ordinal: usize,
    pub chunk_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkNode {
    pub chunk_id: String,
    pub doc_id: String,
    pub section_id: String,
    pub text: String,
    /// Position within the parent section.
    pub ordinal: usize,
    #[serde(default)]
    pub next_chunk_id: Option<String>,
    /// Raw-text embedding, used only by the naive retrieval baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

/// Output of [`ingest_document`], ready to be added to a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedDocument {
    pub document: DocumentNode,
    pub sections: Vec<SectionNode>,
    pub chunks: Vec<ChunkNode>,
}

pub fn section_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}:s{ordinal}")
}

pub fn chunk_id(doc_id: &str, section_ordinal: usize, chunk_ordinal: usize) -> String {
    format!("{doc_id}:s{section_ordinal}:c{chunk_ordinal}")
}

struct RawSection {
    heading: String,
    body: String,
}

/// Splits `source` into sections and chunks.
pub fn ingest_document(
    doc_id: &str,
    source_uri: &str,
    source: &str,
    config: &ChunkingConfig,
) -> Result<IngestedDocument, CorpusError> {
    if config.max_chunk_chars < MIN_MAX_CHUNK_CHARS {
        return Err(CorpusError::InvalidConfig(config.max_chunk_chars));
    }
    if source.trim().is_empty() {
        return Err(CorpusError::EmptySource(doc_id.to_string()));
    }

    let raw = split_sections(doc_id, source)?;
    let title = raw
        .iter()
        .find(|s| !s.heading.is_empty())
        .map(|s| s.heading.clone())
        .unwrap_or_else(|| doc_id.to_string());

    let mut sections = Vec::with_capacity(raw.len());
    let mut chunks: Vec<ChunkNode> = Vec::new();
    for (s_ord, section) in raw.iter().enumerate() {
        let sid = section_id(doc_id, s_ord);
        let mut chunk_ids = Vec::new();
        for (c_ord, span) in pack_chunks(&section.body, config.max_chunk_chars)
            .into_iter()
            .enumerate()
        {
            let cid = chunk_id(doc_id, s_ord, c_ord);
            if let Some(prev) = chunks.last_mut() {
                prev.next_chunk_id = Some(cid.clone());
            }
            chunk_ids.push(cid.clone());
            chunks.push(ChunkNode {
                chunk_id: cid,
                doc_id: doc_id.to_string(),
                section_id: sid.clone(),
                text: section.body[span].to_string(),
                ordinal: c_ord,
                next_chunk_id: None,
                embedding: None,
            });
        }
        sections.push(SectionNode {
            section_id: sid,
            doc_id: doc_id.to_string(),
            heading: section.heading.clone(),
            ordinal: s_ord,
            chunk_ids,
        });
    }

    Ok(IngestedDocument {
        document: DocumentNode {
            doc_id: doc_id.to_string(),
            title,
            source_uri: source_uri.to_string(),
            section_ids: sections.iter().map(|s| s.section_id.clone()).collect(),
        },
        sections,
        chunks,
    })
}

fn split_sections(doc_id: &str, source: &str) -> Result<Vec<RawSection>, CorpusError> {
    let mut sections = Vec::new();
    let mut current = RawSection {
        heading: String::new(),
        body: String::new(),
    };
    let mut seen_heading = false;
    for (idx, line) in source.split_inclusive('\n').enumerate() {
        if line.starts_with('#') {
            let depth = line.chars().take_while(|&c| c == '#').count();
            let text = line[depth..].trim();
            if text.is_empty() {
                return Err(CorpusError::MalformedHeading {
                    doc_id: doc_id.to_string(),
                    line: idx + 1,
                });
            }
            if depth == 1 {
                // Text before the first heading becomes an untitled section.
                if seen_heading || !current.body.trim().is_empty() {
                    sections.push(current);
                }
                current = RawSection {
                    heading: text.to_string(),
                    body: String::new(),
                };
                seen_heading = true;
                continue;
            }
        }
        current.body.push_str(line);
    }
    sections.push(current);
    Ok(sections)
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Paragraph ranges: maximal runs of lines separated by blank lines.
fn paragraph_ends(body: &str) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut offset = 0;
    let mut last_content_end: Option<usize> = None;
    for line in body.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(end) = last_content_end.take() {
                ends.push(end);
            }
        } else {
            last_content_end = Some(offset + line.trim_end().len());
        }
        offset += line.len();
    }
    if let Some(end) = last_content_end {
        ends.push(end);
    }
    ends
}

/// Greedy sentence packing. Returns byte ranges into `body`.
fn pack_chunks(body: &str, max_chars: usize) -> Vec<Range<usize>> {
    let sentences = sentence_spans(body);
    let para_ends = paragraph_ends(body);

    let mut chunks = Vec::new();
    let mut current: Option<Range<usize>> = None;
    let mut prev_para: Option<usize> = None;
    for sentence in sentences {
        // Paragraph that this sentence belongs to: the first paragraph end at
        // or after the sentence end.
        let para_idx = para_ends.partition_point(|&e| e < sentence.end);
        let para_end = para_ends.get(para_idx).copied().unwrap_or(body.len());
        let starts_paragraph = prev_para != Some(para_idx);
        prev_para = Some(para_idx);

        current = match current {
            None => Some(sentence),
            Some(cur) => {
                let extended_end = if starts_paragraph {
                    para_end.max(sentence.end)
                } else {
                    sentence.end
                };
                if char_len(&body[cur.start..extended_end]) <= max_chars {
                    Some(cur.start..sentence.end)
                } else {
                    chunks.push(cur);
                    Some(sentence)
                }
            }
        };
    }
    if let Some(cur) = current {
        chunks.push(cur);
    }
    chunks
}

/// Reads every `.txt` / `.md` file in `dir` (sorted by file name) as one
/// document whose id is the file stem.
pub fn load_corpus_dir(
    dir: &Path,
    config: &ChunkingConfig,
) -> Result<Vec<IngestedDocument>, CorpusError> {
    let mut docs = Vec::new();
    for path in text_files(dir)? {
        let source = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        docs.push(ingest_document(
            &doc_id,
            &path.display().to_string(),
            &source,
            config,
        )?);
    }
    Ok(docs)
}

pub(crate) fn text_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_text = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("txt") | Some("md")
        );
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if path.is_file() && is_text && !hidden {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Orders chunk ids by document id, then by position along the document's
/// successor chain.
pub fn document_order(
    graph: &TripartiteGraph,
    chunk_ids: &BTreeSet<String>,
) -> Result<Vec<String>, CorpusError> {
    let mut docs = BTreeSet::new();
    for id in chunk_ids {
        let chunk = graph
            .chunk(id)
            .ok_or_else(|| CorpusError::UnknownChunk(id.clone()))?;
        docs.insert(chunk.doc_id.clone());
    }

    let mut position: BTreeMap<&str, (String, usize)> = BTreeMap::new();
    for doc in &docs {
        for (pos, chunk) in graph.chain(doc).enumerate() {
            if chunk_ids.contains(&chunk.chunk_id) {
                position.insert(chunk.chunk_id.as_str(), (doc.clone(), pos));
            }
        }
    }

    let mut ordered: Vec<&String> = chunk_ids.iter().collect();
    // Chunks not reachable from the head of their chain sort last within
    // the document; a valid graph has none.
    ordered.sort_by(|a, b| {
        let key = |id: &String| {
            position
                .get(id.as_str())
                .map(|(d, p)| (d.clone(), *p))
                .unwrap_or_else(|| (graph.chunk(id).unwrap().doc_id.clone(), usize::MAX))
        };
        key(a).cmp(&key(b)).then_with(|| a.cmp(b))
    });
    Ok(ordered.into_iter().cloned().collect())
}
