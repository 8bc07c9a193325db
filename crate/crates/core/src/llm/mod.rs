//! Chat-completion backends, the prompt catalog, and structured-response
//! extraction.
//!
//! Two backends implement [`ChatBackend`]: [`LiveBackend`] talks to a
//! chat-completions HTTP endpoint, [`TranscriptBackend`] replays recorded
//! responses in order, one stream per template. [`RecordingBackend`] wraps any
//! backend and captures a transcript that can be replayed later.

mod extract;
mod live;
mod prompts;
mod transcript;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{
    extract_code_blocks, extract_json_block, parse_subtype_response, single_code_block, SubtypeVerdict,
    NOT_FOUND_MARKERS,
};
pub use live::{LiveBackend, LiveConfig, ENV_API_BASE, ENV_API_KEY, ENV_MODEL};
pub use prompts::{placeholders, render_prompt, template_text};
pub use transcript::{RecordingBackend, Transcript, TranscriptBackend, TranscriptEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("template `{template}` has unbound placeholder `{name}`")]
    UnboundPlaceholder { template: TemplateName, name: String },
    #[error("chat backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("transcript has no more responses for `{0}`")]
    TranscriptExhausted(TemplateName),
    #[error("chat request timed out")]
    Timeout,
    #[error("response contains no structured block")]
    NoStructuredBlock,
    #[error("malformed structured response: {0}")]
    MalformedStructure(String),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    SubproblemIdentify,
    DistillRoot,
    DistillSubtype,
    DistillModelingThoughts,
    AddNewNodes,
    ModelWithThoughts,
    CodeCorrection,
    ModelPlain,
}

impl TemplateName {
    pub const ALL: [TemplateName; 8] = [
        TemplateName::SubproblemIdentify,
        TemplateName::DistillRoot,
        TemplateName::DistillSubtype,
        TemplateName::DistillModelingThoughts,
        TemplateName::AddNewNodes,
        TemplateName::ModelWithThoughts,
        TemplateName::CodeCorrection,
        TemplateName::ModelPlain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::SubproblemIdentify => "subproblem_identify",
            TemplateName::DistillRoot => "distill_root",
            TemplateName::DistillSubtype => "distill_subtype",
            TemplateName::DistillModelingThoughts => "distill_modeling_thoughts",
            TemplateName::AddNewNodes => "add_new_nodes",
            TemplateName::ModelWithThoughts => "model_with_thoughts",
            TemplateName::CodeCorrection => "code_correction",
            TemplateName::ModelPlain => "model_plain",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template: TemplateName,
    pub variables: BTreeMap<String, String>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(template: TemplateName) -> Self {
        Self {
            template,
            variables: BTreeMap::new(),
            temperature: 0.0,
            max_tokens: 4096,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    /// The prompt text this request renders to.
    pub fn render(&self) -> Result<String, LlmError> {
        render_prompt(self.template, &self.variables)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    /// Seconds spent waiting for the completion.
    pub latency: f64,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}
