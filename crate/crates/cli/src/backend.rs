// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Backend selection.

use std::sync::Arc;

use tripartite_core::annotate::{AnnotationTemplate, LlmAnnotator, MockAnnotator};
use tripartite_core::llmclient::{HttpClient, MockEmbedder, Recorder, ReplayBackend};
use tripartite_core::{AnnotatorBackend, BackendError, ChatBackend, EmbedderBackend};

use crate::config::{BackendKind, PipelineConfig};
use crate::workspace::{fail, Failure};

trait Llm: ChatBackend + EmbedderBackend {}

impl<T: ChatBackend + EmbedderBackend> Llm for T {}

/// One chat+embedding backend shared by the annotator and the embedder.
#[derive(Clone)]
struct Shared(Arc<dyn Llm>);

impl ChatBackend for Shared {
    fn chat(&self, system: &str, user: &str) -> Result<String, BackendError> {
        self.0.chat(system, user)
    }
}

impl EmbedderBackend for Shared {
    fn dimension(&self) -> Result<usize, BackendError> {
        self.0.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.0.embed(text)
    }
}

pub struct Backends {
    pub annotator: Box<dyn AnnotatorBackend>,
    pub embedder: Box<dyn EmbedderBackend>,
}

impl Backends {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, Failure> {
        let llm = cfg.llm.clone().with_env();
        let shared: Arc<dyn Llm> = match cfg.backend {
            BackendKind::Mock => {
                return Ok(Self {
                    annotator: Box::new(MockAnnotator),
                    embedder: Box::new(MockEmbedder::default()),
                })
            }
            BackendKind::Replay => {
                let path = cfg
                    .replay_path
                    .as_deref()
                    .ok_or_else(|| Failure::user("the replay backend needs --replay <file>"))?;
                Arc::new(ReplayBackend::load(path, &llm).map_err(fail("loading replay file"))?)
            }
            BackendKind::Http => {
                let client = HttpClient::new(llm.clone()).map_err(fail("configuring HTTP backend"))?;
                match &cfg.record_path {
                    Some(path) => Arc::new(Recorder::new(client, &llm, path).map_err(fail("opening record file"))?),
                    None => Arc::new(client),
                }
            }
        };
        let shared = Shared(shared);
        Ok(Self {
            annotator: Box::new(LlmAnnotator::new(shared.clone(), AnnotationTemplate::default())),
            embedder: Box::new(shared),
        })
    }
}
