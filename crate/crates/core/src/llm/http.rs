//! HTTP backend speaking the chat-completions wire format: one user message
//! per prompt, retries with exponential backoff on 429/5xx/transport errors.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionModel, CompletionParams, LlmError, API_KEY_ENV};

/// Request body; field order is the wire contract.
#[derive(Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: Vec<ChatMessage<'a>>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<&'a Vec<String>>,
}

#[derive(Serialize)]
pub struct ChatMessage<'a> {
    pub role: &'a str,
    pub content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: AssistantMessage,
}

#[derive(Deserialize)]
struct AssistantMessage {
    content: String,
}

/// Serialize a prompt into the exact request bytes the client sends.
pub fn request_body(model: &str, prompt: &str, params: &CompletionParams) -> Vec<u8> {
    let req = ChatRequest {
        model,
        messages: vec![ChatMessage { role: "user", content: prompt }],
        temperature: params.temperature,
        max_tokens: params.max_tokens,
        stop: params.stop.as_ref(),
    };
    serde_json::to_vec(&req).expect("chat request serialization")
}

/// Counting semaphore bounding in-flight requests.
struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { permits: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.cv.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().expect("semaphore lock") += 1;
        self.sem.cv.notify_one();
    }
}

pub struct HttpModel {
    client: reqwest::blocking::Client,
    endpoint: String,
    model_name: String,
    api_key: Option<String>,
    /// Sleep before each retry; length bounds the retry count.
    backoff: Vec<Duration>,
    limiter: Semaphore,
    request_counter: AtomicU64,
}

impl HttpModel {
    /// Default client: 60 s per-request timeout, retries after 1 s, 2 s, 4 s,
    /// at most 4 requests in flight. The API key is read from
    /// `NAV_LLM_API_KEY`; requests go out without auth when it is unset.
    pub fn new(endpoint: String, model_name: String) -> Self {
        Self::with_timeout(endpoint, model_name, Duration::from_secs(60))
    }

    pub fn with_timeout(endpoint: String, model_name: String, timeout: Duration) -> Self {
        HttpModel {
            client: reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .expect("http client"),
            endpoint,
            model_name,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            backoff: vec![
                Duration::from_secs(1),
                Duration::from_secs(2),
                Duration::from_secs(4),
            ],
            limiter: Semaphore::new(4),
            request_counter: AtomicU64::new(0),
        }
    }

    /// Override the retry delays (tests use millisecond delays).
    pub fn with_backoff(mut self, backoff: Vec<Duration>) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.limiter = Semaphore::new(n.max(1));
        self
    }

    /// Test hook; production keys come from the environment only.
    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn backoff_schedule(&self) -> &[Duration] {
        &self.backoff
    }

    fn attempt(&self, body: &[u8], request_id: &str) -> Result<String, AttemptError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {}", key));
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Err(AttemptError::Retryable(format!("transport: {}", e))),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(AttemptError::Retryable(format!("http status {}", status)));
        }
        if status >= 400 {
            let message = resp.text().unwrap_or_default();
            return Err(AttemptError::Fatal(LlmError::Api {
                request_id: request_id.to_string(),
                status,
                message,
            }));
        }
        let parsed: ChatResponse = match resp.json() {
            Ok(p) => p,
            Err(e) => {
                return Err(AttemptError::Fatal(LlmError::Api {
                    request_id: request_id.to_string(),
                    status,
                    message: format!("malformed response body: {}", e),
                }))
            }
        };
        match parsed.choices.into_iter().next() {
            Some(c) => Ok(c.message.content),
            None => Err(AttemptError::Fatal(LlmError::Api {
                request_id: request_id.to_string(),
                status,
                message: "response has no choices".into(),
            })),
        }
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(LlmError),
}

impl CompletionModel for HttpModel {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, LlmError> {
        let _permit = self.limiter.acquire();
        let n = self.request_counter.fetch_add(1, Ordering::Relaxed) + 1;
        let request_id = format!("req-{}", n);
        let body = request_body(&self.model_name, prompt, params);

        let mut last_failure = String::new();
        for attempt in 0..=self.backoff.len() {
            if attempt > 0 {
                std::thread::sleep(self.backoff[attempt - 1]);
            }
            match self.attempt(&body, &request_id) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Retryable(msg)) => last_failure = msg,
            }
        }
        Err(LlmError::Transport {
            request_id,
            message: format!("retries exhausted: {}", last_failure),
        })
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn backend_name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_bytes_are_stable() {
        let body = request_body("m1", "hello", &CompletionParams::default());
        assert_eq!(
            String::from_utf8(body).unwrap(),
            r#"{"model":"m1","messages":[{"role":"user","content":"hello"}],"temperature":0.0,"max_tokens":512}"#
        );
    }

    #[test]
    fn default_backoff_is_one_two_four_seconds() {
        let m = HttpModel::new("http://localhost:1/v1".into(), "m".into());
        assert_eq!(
            m.backoff_schedule(),
            &[Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)]
        );
    }
}
