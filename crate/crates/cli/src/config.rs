// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Pipeline configuration: JSON file, then environment, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tripartite_core::pipeline::DEFAULT_NAIVE_MINIMA;
use tripartite_core::{BackendConfig, ChunkingConfig, Thresholds};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Keyword annotator and hashing embedder; no network.
    #[default]
    Mock,
    /// Canned replies from a recorded exchange file; no network.
    Replay,
    /// OpenAI-compatible HTTP endpoints.
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_dir: Option<PathBuf>,
    pub ontology_path: Option<PathBuf>,
    pub objects_dir: Option<PathBuf>,
    pub graph_path: Option<PathBuf>,
    pub gold_path: Option<PathBuf>,
    /// Query template file; `{object_title}` is substituted.
    pub template_path: Option<PathBuf>,
    pub thresholds: Thresholds,
    pub backend: BackendKind,
    pub replay_path: Option<PathBuf>,
    /// Record every HTTP exchange here for later replay.
    pub record_path: Option<PathBuf>,
    pub chunking: ChunkingConfig,
    pub naive_minima: Vec<f64>,
    pub llm: BackendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_dir: None,
            ontology_path: None,
            objects_dir: None,
            graph_path: None,
            gold_path: None,
            template_path: None,
            thresholds: Thresholds::default(),
            backend: BackendKind::Mock,
            replay_path: None,
            record_path: None,
            chunking: ChunkingConfig::default(),
            naive_minima: DEFAULT_NAIVE_MINIMA.to_vec(),
            llm: BackendConfig::default(),
        }
    }
}

/// Flags that override the config file. Each one can also come from the
/// environment; clap gives flags precedence over the environment.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true, env = "TRIPARTITE_CORPUS_DIR")]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long = "ontology", global = true, env = "TRIPARTITE_ONTOLOGY")]
    pub ontology_path: Option<PathBuf>,
    #[arg(long, global = true, env = "TRIPARTITE_OBJECTS_DIR")]
    pub objects_dir: Option<PathBuf>,
    #[arg(long = "graph", global = true, env = "TRIPARTITE_GRAPH")]
    pub graph_path: Option<PathBuf>,
    #[arg(long = "gold", global = true, env = "TRIPARTITE_GOLD")]
    pub gold_path: Option<PathBuf>,
    #[arg(long = "template", global = true, env = "TRIPARTITE_TEMPLATE")]
    pub template_path: Option<PathBuf>,
    #[arg(long, global = true, env = "TRIPARTITE_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, global = true, env = "TRIPARTITE_BETA")]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_enum, env = "TRIPARTITE_BACKEND")]
    pub backend: Option<BackendKind>,
    #[arg(long = "replay", global = true, env = "TRIPARTITE_REPLAY")]
    pub replay_path: Option<PathBuf>,
    #[arg(long = "record", global = true, env = "TRIPARTITE_RECORD")]
    pub record_path: Option<PathBuf>,
    #[arg(long, global = true, env = "TRIPARTITE_MAX_CHUNK_CHARS")]
    pub max_chunk_chars: Option<usize>,
    #[arg(long, global = true, env = "TRIPARTITE_MAX_IN_FLIGHT")]
    pub max_in_flight: Option<usize>,
    /// Comma-separated similarity minima for the naive baseline.
    #[arg(long, global = true, value_delimiter = ',', env = "TRIPARTITE_NAIVE_MINIMA")]
    pub naive_minima: Option<Vec<f64>>,
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 8] {
        [
            &mut self.corpus_dir,
            &mut self.ontology_path,
            &mut self.objects_dir,
            &mut self.graph_path,
            &mut self.gold_path,
            &mut self.template_path,
            &mut self.replay_path,
            &mut self.record_path,
        ]
    }

    pub fn apply(&mut self, o: &Overrides) {
        let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        set(&mut self.corpus_dir, &o.corpus_dir);
        set(&mut self.ontology_path, &o.ontology_path);
        set(&mut self.objects_dir, &o.objects_dir);
        set(&mut self.graph_path, &o.graph_path);
        set(&mut self.gold_path, &o.gold_path);
        set(&mut self.template_path, &o.template_path);
        set(&mut self.replay_path, &o.replay_path);
        set(&mut self.record_path, &o.record_path);
        if let Some(a) = o.alpha {
            self.thresholds.alpha = a;
        }
        if let Some(b) = o.beta {
            self.thresholds.beta = b;
        }
        if let Some(b) = o.backend {
            self.backend = b;
        }
        if let Some(n) = o.max_chunk_chars {
            self.chunking.max_chunk_chars = n;
        }
        if let Some(n) = o.max_in_flight {
            self.llm.max_in_flight = n;
        }
        if let Some(m) = &o.naive_minima {
            self.naive_minima.clone_from(m);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.thresholds.validate()?;
        if self.llm.max_in_flight == 0 {
            bail!("max_in_flight must be positive");
        }
        if self.backend == BackendKind::Replay && self.replay_path.is_none() {
            bail!("the replay backend needs a recording; pass --replay <file>");
        }
        Ok(())
    }
}
