// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Output directory layout, the writer lock and exit-code classification.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use tripartite_core::annotate::AnnotateError;
use tripartite_core::baseline::BaselineError;
use tripartite_core::classify::ClassifyError;
use tripartite_core::prompt::PromptError;
use tripartite_core::scoring::ScoringError;
use tripartite_core::{BackendError, TripartiteGraph};

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, missing prerequisite or invalid configuration (exit 1).
    User(anyhow::Error),
    /// The annotation or embedding backend failed (exit 2).
    Backend(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Backend(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::User(e) | Failure::Backend(e) => e,
        }
    }

    pub fn user(msg: impl std::fmt::Display) -> Self {
        Failure::User(anyhow!("{msg}"))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::User(e)
    }
}

/// Whether an error originates in the remote or replay backend.
pub trait BackendCaused {
    fn backend_caused(&self) -> bool;
}

impl BackendCaused for BackendError {
    fn backend_caused(&self) -> bool {
        !matches!(self, BackendError::Config(_))
    }
}

impl BackendCaused for AnnotateError {
    fn backend_caused(&self) -> bool {
        match self {
            AnnotateError::BackendUnavailable(e) => e.backend_caused(),
            AnnotateError::BackendMalformedReply(_) => true,
            _ => false,
        }
    }
}

impl BackendCaused for ScoringError {
    fn backend_caused(&self) -> bool {
        matches!(self, ScoringError::BackendUnavailable(e) if e.backend_caused())
    }
}

impl BackendCaused for ClassifyError {
    fn backend_caused(&self) -> bool {
        matches!(self, ClassifyError::Scoring(e) if e.backend_caused())
    }
}

impl BackendCaused for BaselineError {
    fn backend_caused(&self) -> bool {
        match self {
            BaselineError::Backend(e) => e.backend_caused(),
            BaselineError::Scoring(e) => e.backend_caused(),
            BaselineError::Classify(e) => e.backend_caused(),
            _ => false,
        }
    }
}

impl BackendCaused for PromptError {
    fn backend_caused(&self) -> bool {
        false
    }
}

/// Wraps a module error with context, keeping its exit-code class.
pub fn fail<E>(context: &str) -> impl FnOnce(E) -> Failure + '_
where
    E: BackendCaused + std::error::Error + Send + Sync + 'static,
{
    move |e| {
        let backend = e.backend_caused();
        let err = anyhow::Error::new(e).context(context.to_string());
        if backend {
            Failure::Backend(err)
        } else {
            Failure::User(err)
        }
    }
}

pub const LOCK_FILE: &str = ".lock";

/// Exclusive writer lock on an output directory. Released on drop.
#[derive(Debug)]
pub struct WriteLock {
    path: PathBuf,
}

impl WriteLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(anyhow!(
                "{} is locked by another writer; remove {} if no other command is running",
                dir.display(),
                path.display()
            )),
            Err(e) => Err(anyhow::Error::new(e).context(format!("creating {}", path.display()))),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Artifact paths under the output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
    pub graph_path: PathBuf,
}

impl Workspace {
    pub fn new(dir: PathBuf, graph_path: Option<PathBuf>) -> Self {
        let graph_path = graph_path.unwrap_or_else(|| dir.join("graph.jsonl"));
        Self { dir, graph_path }
    }

    pub fn ontology(&self) -> PathBuf {
        self.dir.join("ontology.json")
    }

    pub fn scores(&self) -> PathBuf {
        self.dir.join("scores.csv")
    }

    pub fn distributions(&self) -> PathBuf {
        self.dir.join("distributions.json")
    }

    pub fn annotation_report(&self) -> PathBuf {
        self.dir.join("annotation.json")
    }

    pub fn failed_pairs(&self) -> PathBuf {
        self.dir.join("failed_pairs.jsonl")
    }

    pub fn classification(&self, object_id: &str) -> PathBuf {
        self.dir.join("classification").join(format!("{object_id}.json"))
    }

    pub fn prompt(&self, object_id: &str) -> PathBuf {
        self.dir.join("prompts").join(format!("{object_id}.txt"))
    }

    pub fn plan(&self, object_id: &str) -> PathBuf {
        self.dir.join("prompts").join(format!("{object_id}.plan.json"))
    }

    pub fn density(&self) -> PathBuf {
        self.dir.join("density.csv")
    }

    /// The stored graph, or an empty one when none exists yet.
    pub fn load_or_new(&self) -> Result<TripartiteGraph, Failure> {
        if self.graph_path.exists() {
            self.load()
        } else {
            Ok(TripartiteGraph::new())
        }
    }

    pub fn load(&self) -> Result<TripartiteGraph, Failure> {
        if !self.graph_path.exists() {
            return Err(Failure::user(format!(
                "graph missing at {}; run `ingest` first",
                self.graph_path.display()
            )));
        }
        TripartiteGraph::load(&self.graph_path)
            .with_context(|| format!("loading {}", self.graph_path.display()))
            .map_err(Failure::User)
    }

    pub fn save(&self, graph: &TripartiteGraph) -> Result<(), Failure> {
        graph
            .save(&self.graph_path)
            .with_context(|| format!("saving {}", self.graph_path.display()))
            .map_err(Failure::User)
    }
}

/// Writes `contents` via a temporary file and rename.
pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    let inner = || -> anyhow::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, contents)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    };
    inner()
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::User)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_lock_is_refused_until_release() {
        let dir = tempfile::tempdir().unwrap();
        let lock = WriteLock::acquire(dir.path()).unwrap();
        let err = WriteLock::acquire(dir.path()).unwrap_err();
        assert!(err.to_string().contains("locked"));
        drop(lock);
        assert!(WriteLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn backend_errors_map_to_exit_two() {
        let f = fail::<ScoringError>("embedding")(ScoringError::BackendUnavailable(BackendError::Transport("x".into())));
        assert_eq!(f.exit_code(), 2);
        let f = fail::<ScoringError>("embedding")(ScoringError::BackendUnavailable(BackendError::Config("no url".into())));
        assert_eq!(f.exit_code(), 1);
        let f = fail::<ClassifyError>("x")(ClassifyError::UnknownObject("o".into()));
        assert_eq!(f.exit_code(), 1);
    }
}
