//! Recorded-transcript replay.
//!
//! A transcript is line-delimited JSON, one `{"template_name", "response_text"}`
//! record per line. Responses are consumed strictly in order within each
//! template stream, so editing a template's wording does not invalidate the
//! recordings.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError, TemplateName, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub template_name: TemplateName,
    pub response_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, template_name: TemplateName, response_text: impl Into<String>) -> &mut Self {
        self.entries.push(TranscriptEntry {
            template_name,
            response_text: response_text.into(),
        });
        self
    }

    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(line)
                .map_err(|e| LlmError::MalformedTranscript(format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Replays a [`Transcript`]. Requests still have their placeholders checked
/// so fixtures catch prompt-wiring mistakes.
#[derive(Debug, Default)]
pub struct TranscriptBackend {
    streams: Mutex<HashMap<TemplateName, VecDeque<String>>>,
}

impl TranscriptBackend {
    pub fn new(transcript: Transcript) -> Self {
        let mut streams: HashMap<TemplateName, VecDeque<String>> = HashMap::new();
        for e in transcript.entries {
            streams
                .entry(e.template_name)
                .or_default()
                .push_back(e.response_text);
        }
        Self {
            streams: Mutex::new(streams),
        }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LlmError> {
        Transcript::parse(text).map(Self::new)
    }

    /// Responses not yet consumed, per template.
    pub fn remaining(&self) -> HashMap<TemplateName, usize> {
        let streams = self.streams.lock().expect("transcript lock poisoned");
        streams
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(k, q)| (*k, q.len()))
            .collect()
    }
}

impl ChatBackend for TranscriptBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.render()?;
        let mut streams = self.streams.lock().expect("transcript lock poisoned");
        let text = streams
            .get_mut(&request.template)
            .and_then(VecDeque::pop_front)
            .ok_or(LlmError::TranscriptExhausted(request.template))?;
        Ok(ChatResponse {
            text,
            usage: Usage::default(),
            latency: 0.0,
        })
    }
}

/// Passes requests through to `inner` and records every successful response.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Transcript>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            recorded: Mutex::new(Transcript::new()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.recorded.lock().expect("recording lock poisoned").clone()
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(request)?;
        self.recorded
            .lock()
            .expect("recording lock poisoned")
            .push(request.template, response.text.clone());
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_request() -> ChatRequest {
        ChatRequest::new(TemplateName::ModelPlain).var("user_input", "p")
    }

    #[test]
    fn one_entry_one_call() {
        let mut t = Transcript::new();
        t.push(TemplateName::ModelPlain, "answer");
        let backend = TranscriptBackend::new(t);
        assert_eq!(backend.complete(&plain_request()).unwrap().text, "answer");
        assert_eq!(
            backend.complete(&plain_request()),
            Err(LlmError::TranscriptExhausted(TemplateName::ModelPlain))
        );
    }

    #[test]
    fn streams_are_independent() {
        let mut t = Transcript::new();
        t.push(TemplateName::ModelPlain, "p1")
            .push(TemplateName::CodeCorrection, "c1")
            .push(TemplateName::ModelPlain, "p2");
        let backend = TranscriptBackend::new(t);
        let fix = ChatRequest::new(TemplateName::CodeCorrection)
            .var("user_input", "p")
            .var("code", "x")
            .var("error", "e");
        assert_eq!(backend.complete(&fix).unwrap().text, "c1");
        assert_eq!(backend.complete(&plain_request()).unwrap().text, "p1");
        assert_eq!(backend.complete(&plain_request()).unwrap().text, "p2");
        assert!(backend.remaining().is_empty());
    }

    #[test]
    fn unbound_request_is_rejected_before_consuming() {
        let mut t = Transcript::new();
        t.push(TemplateName::ModelPlain, "answer");
        let backend = TranscriptBackend::new(t);
        let bad = ChatRequest::new(TemplateName::ModelPlain);
        assert!(matches!(
            backend.complete(&bad),
            Err(LlmError::UnboundPlaceholder { .. })
        ));
        assert_eq!(backend.remaining().get(&TemplateName::ModelPlain), Some(&1));
    }

    #[test]
    fn jsonl_round_trip_and_recording() {
        let mut t = Transcript::new();
        t.push(TemplateName::ModelPlain, "line\nbreak \"quoted\"");
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(Transcript::parse(&text).unwrap(), t);

        let rec = RecordingBackend::new(TranscriptBackend::new(t.clone()));
        rec.complete(&plain_request()).unwrap();
        assert_eq!(rec.transcript(), t);

        assert!(matches!(
            Transcript::parse("{oops"),
            Err(LlmError::MalformedTranscript(_))
        ));
    }
}
