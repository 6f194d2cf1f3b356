//! Blocking JSON-over-HTTP client shared by the remote classifier and the
//! generator/summarizer clients.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HttpError {
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("malformed response from {endpoint}: {message}")]
    Malformed { endpoint: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout: Duration,
    /// Additional attempts after the first failure (transport errors only).
    pub retries: u32,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            timeout: Duration::from_millis(10_000),
            retries: 2,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }
}

#[derive(Debug)]
pub struct JsonClient {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl JsonClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(config.timeout)
            .timeout(config.timeout)
            .build();
        JsonClient { config, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.config.url
    }

    pub fn post<Req, Resp>(&self, body: &Req) -> Result<Resp, HttpError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let mut attempt = 0;
        loop {
            match self.post_once(body) {
                Err(e @ (HttpError::Timeout { .. } | HttpError::Transport { .. }))
                    if attempt < self.config.retries =>
                {
                    attempt += 1;
                    tracing::debug!(attempt, error = %e, "retrying request");
                }
                other => return other,
            }
        }
    }

    fn post_once<Req, Resp>(&self, body: &Req) -> Result<Resp, HttpError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let endpoint = self.config.url.clone();
        let response = match self.agent.post(&self.config.url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                // 5xx may be transient; 4xx means the request itself is wrong.
                return Err(if code >= 500 {
                    HttpError::Transport {
                        endpoint,
                        message: format!("HTTP {code}: {detail}"),
                    }
                } else {
                    HttpError::Malformed {
                        endpoint,
                        message: format!("HTTP {code}: {detail}"),
                    }
                });
            }
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                return Err(if is_timeout(&message) {
                    HttpError::Timeout { endpoint }
                } else {
                    HttpError::Transport { endpoint, message }
                });
            }
        };
        let text = response.into_string().map_err(|e| {
            let message = e.to_string();
            if is_timeout(&message) {
                HttpError::Timeout {
                    endpoint: endpoint.clone(),
                }
            } else {
                HttpError::Transport {
                    endpoint: endpoint.clone(),
                    message,
                }
            }
        })?;
        serde_json::from_str(&text).map_err(|e| HttpError::Malformed {
            endpoint,
            message: format!("{e}: {text}"),
        })
    }
}

fn is_timeout(message: &str) -> bool {
    let m = message.to_ascii_lowercase();
    m.contains("timed out") || m.contains("timeout") || m.contains("would block")
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct InFlightLimit {
    available: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimit {
    pub fn new(limit: usize) -> Self {
        InFlightLimit {
            available: Mutex::new(limit.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        InFlightPermit { limit: self }
    }
}

pub struct InFlightPermit<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut n = self.limit.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.limit.freed.notify_one();
    }
}
