//! Generator and summarizer clients.
//!
//! Generator: `{context: [{speaker, text}], memory: [text]}` -> `{text}`.
//! Summarizer: `{turns: [{speaker, text}]}` -> `{sentences: [text]}`.

use std::collections::HashSet;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dialogue::{Speaker, Turn};
use crate::http::{EndpointConfig, HttpError, JsonClient};
use crate::text::normalize;

pub trait Generator: Send + Sync {
    fn generate(&self, context: &[Turn], memory: &[String]) -> Result<String, HttpError>;
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, turns: &[Turn]) -> Result<Vec<String>, HttpError>;
}

#[derive(Serialize)]
struct WireTurn<'a> {
    speaker: Speaker,
    text: &'a str,
}

fn wire_turns(turns: &[Turn]) -> Vec<WireTurn<'_>> {
    turns
        .iter()
        .map(|t| WireTurn {
            speaker: t.speaker,
            text: &t.text,
        })
        .collect()
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    context: Vec<WireTurn<'a>>,
    memory: &'a [String],
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Serialize)]
struct SummarizeRequest<'a> {
    turns: Vec<WireTurn<'a>>,
}

#[derive(Deserialize)]
struct SummarizeResponse {
    sentences: Vec<String>,
}

#[derive(Debug)]
pub struct HttpGenerator {
    client: JsonClient,
}

impl HttpGenerator {
    pub fn new(config: EndpointConfig) -> Self {
        HttpGenerator {
            client: JsonClient::new(config),
        }
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, context: &[Turn], memory: &[String]) -> Result<String, HttpError> {
        let resp: GenerateResponse = self.client.post(&GenerateRequest {
            context: wire_turns(context),
            memory,
        })?;
        Ok(resp.text)
    }
}

#[derive(Debug)]
pub struct HttpSummarizer {
    client: JsonClient,
}

impl HttpSummarizer {
    pub fn new(config: EndpointConfig) -> Self {
        HttpSummarizer {
            client: JsonClient::new(config),
        }
    }
}

impl Summarizer for HttpSummarizer {
    fn summarize(&self, turns: &[Turn]) -> Result<Vec<String>, HttpError> {
        let resp: SummarizeResponse = self.client.post(&SummarizeRequest {
            turns: wire_turns(turns),
        })?;
        Ok(resp.sentences)
    }
}

/// Replies with the last user utterance, optionally prefixed. Remembers the
/// memory it was last called with.
#[derive(Debug, Default)]
pub struct EchoGenerator {
    prefix: String,
    last_memory: Mutex<Option<Vec<String>>>,
}

impl EchoGenerator {
    pub fn new(prefix: impl Into<String>) -> Self {
        EchoGenerator {
            prefix: prefix.into(),
            last_memory: Mutex::new(None),
        }
    }

    pub fn last_memory(&self) -> Option<Vec<String>> {
        self.last_memory.lock().unwrap().clone()
    }
}

impl Generator for EchoGenerator {
    fn generate(&self, context: &[Turn], memory: &[String]) -> Result<String, HttpError> {
        *self.last_memory.lock().unwrap() = Some(memory.to_vec());
        let last = context
            .iter()
            .rev()
            .find(|t| t.speaker == Speaker::User)
            .map_or("", |t| t.text.as_str());
        Ok(format!("{}{}", self.prefix, last))
    }
}

/// Summarizes a session as its distinct user utterances.
#[derive(Debug, Default, Clone, Copy)]
pub struct UserUtteranceSummarizer;

impl Summarizer for UserUtteranceSummarizer {
    fn summarize(&self, turns: &[Turn]) -> Result<Vec<String>, HttpError> {
        let mut seen = HashSet::new();
        Ok(turns
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .map(|t| normalize(&t.text))
            .filter(|t| !t.is_empty() && seen.insert(t.clone()))
            .collect())
    }
}
