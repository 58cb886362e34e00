//! Chat-completion clients and the shared request rate limit.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: "system".into(), content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: "user".into(), content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct ClientError(pub String);

pub trait ChatClient: Send {
    fn complete(&mut self, messages: &[Message]) -> Result<String, ClientError>;
}

/// Token bucket: at most `rate` requests start per second, with bursts up to `rate`.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(rate: f64) -> Arc<Self> {
        let cap = rate.max(1.0);
        Arc::new(RateLimiter { rate, state: Mutex::new((cap, Instant::now())) })
    }

    /// Blocks until a request may start.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("rate limiter lock");
                let now = Instant::now();
                let cap = self.rate.max(1.0);
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(cap);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Client for OpenAI-compatible `chat/completions` endpoints.
pub struct HttpClient {
    pub url: String,
    pub model: String,
    pub temperature: f64,
    api_key: Option<String>,
    limiter: Option<Arc<RateLimiter>>,
    agent: ureq::Agent,
}

impl HttpClient {
    /// `url` is the full completions URL. The key, if any, is read from `key_env`.
    pub fn new(url: &str, model: &str, temperature: f64, key_env: Option<&str>, limiter: Option<Arc<RateLimiter>>) -> Self {
        let api_key = key_env.and_then(|v| std::env::var(v).ok());
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build();
        HttpClient { url: url.to_string(), model: model.to_string(), temperature, api_key, limiter, agent }
    }
}

impl ChatClient for HttpClient {
    fn complete(&mut self, messages: &[Message]) -> Result<String, ClientError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let body = json!({ "model": self.model, "messages": messages, "temperature": self.temperature });
        let mut req = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let resp = req.send_json(body).map_err(|e| ClientError(e.to_string()))?;
        let v: serde_json::Value = resp.into_json().map_err(|e| ClientError(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ClientError("response has no choices[0].message.content".into()))
    }
}

/// Replays canned replies in order and records every request. Errors stand
/// for endpoint failures.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    replies: VecDeque<Result<String, String>>,
    pub requests: Vec<Vec<Message>>,
}

impl ScriptedClient {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        ScriptedClient { replies: replies.into_iter().map(|r| Ok(r.into())).collect(), requests: Vec::new() }
    }

    pub fn with_results(replies: impl IntoIterator<Item = Result<String, String>>) -> Self {
        ScriptedClient { replies: replies.into_iter().collect(), requests: Vec::new() }
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&mut self, messages: &[Message]) -> Result<String, ClientError> {
        self.requests.push(messages.to_vec());
        match self.replies.pop_front() {
            Some(Ok(r)) => Ok(r),
            Some(Err(e)) => Err(ClientError(e)),
            None => Err(ClientError("script exhausted".into())),
        }
    }
}

/// A client backed by a closure.
pub struct FnClient<F>(pub F);

impl<F: FnMut(&[Message]) -> Result<String, ClientError> + Send> ChatClient for FnClient<F> {
    fn complete(&mut self, messages: &[Message]) -> Result<String, ClientError> {
        (self.0)(messages)
    }
}

/// Calls `client` up to `attempts` times, doubling the delay after each failure.
pub fn complete_with_retries(
    client: &mut dyn ChatClient,
    messages: &[Message],
    attempts: usize,
    delay: Duration,
) -> Result<String, ClientError> {
    let mut wait = delay;
    let mut last = ClientError("no attempts made".into());
    for i in 0..attempts.max(1) {
        match client.complete(messages) {
            Ok(r) => return Ok(r),
            Err(e) => last = e,
        }
        if i + 1 < attempts {
            std::thread::sleep(wait);
            wait *= 2;
        }
    }
    Err(last)
}
