use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, OperationClassifier};
use crate::http::{EndpointConfig, HttpError, InFlightLimit, JsonClient};
use crate::memory::MemOp;

#[derive(Debug, Serialize)]
pub(crate) struct PairRequest<'a> {
    /// `sentence 1: {m} sentence 2: {s}`
    pub input: String,
    pub sentence1: &'a str,
    pub sentence2: &'a str,
}

impl<'a> PairRequest<'a> {
    pub(crate) fn new(first: &'a str, second: &'a str) -> Self {
        PairRequest {
            input: format!("sentence 1: {first} sentence 2: {second}"),
            sentence1: first,
            sentence2: second,
        }
    }
}

#[derive(Debug, Deserialize)]
pub(crate) struct LabelResponse {
    pub label: String,
}

impl From<HttpError> for ClassifierError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Timeout { endpoint } => ClassifierError::Timeout { endpoint },
            HttpError::Transport { message, .. } => ClassifierError::Transport(message),
            HttpError::Malformed { message, .. } => ClassifierError::MalformedResponse(message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: EndpointConfig,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: EndpointConfig::new(url),
            max_in_flight: 4,
        }
    }
}

/// Client for a text-to-text operation model. Requests carry the input
/// string `sentence 1: {m} sentence 2: {s}`; the response is one label token
/// in `{"0": PASS, "1": APPEND, "2": REPLACE, "3": DELETE}`.
#[derive(Debug)]
pub struct RemoteClassifier {
    client: JsonClient,
    limit: InFlightLimit,
    cache: Mutex<HashMap<(String, String), MemOp>>,
}

impl RemoteClassifier {
    pub fn new(config: RemoteConfig) -> Self {
        RemoteClassifier {
            client: JsonClient::new(config.endpoint),
            limit: InFlightLimit::new(config.max_in_flight),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn endpoint(&self) -> &str {
        self.client.endpoint()
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

pub(crate) fn parse_op_token(label: &str) -> Result<MemOp, ClassifierError> {
    MemOp::from_token(label.trim())
        .ok_or_else(|| ClassifierError::MalformedResponse(format!("label token {label:?} outside {{0,1,2,3}}")))
}

impl OperationClassifier for RemoteClassifier {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        let key = (memory.to_owned(), summary.to_owned());
        if let Some(op) = self.cache.lock().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(op);
        }
        let response: LabelResponse = {
            let _permit = self.limit.acquire();
            self.client.post(&PairRequest::new(memory, summary))?
        };
        let op = parse_op_token(&response.label)?;
        if let Ok(mut c) = self.cache.lock() {
            c.insert(key, op);
        }
        Ok(op)
    }

    fn name(&self) -> &str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_mapping() {
        assert_eq!(parse_op_token("0").unwrap(), MemOp::Pass);
        assert_eq!(parse_op_token("1").unwrap(), MemOp::Append);
        assert_eq!(parse_op_token("2").unwrap(), MemOp::Replace);
        assert_eq!(parse_op_token("3").unwrap(), MemOp::Delete);
        assert!(matches!(parse_op_token("7"), Err(ClassifierError::MalformedResponse(_))));
        assert!(matches!(parse_op_token("PASS"), Err(ClassifierError::MalformedResponse(_))));
    }

    #[test]
    fn request_template() {
        let r = PairRequest::new("Has a dog", "The dog likes carrots");
        assert_eq!(r.input, "sentence 1: Has a dog sentence 2: The dog likes carrots");
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["sentence1"], "Has a dog");
        assert_eq!(v["sentence2"], "The dog likes carrots");
    }
}
