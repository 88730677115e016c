//! Completion-model abstraction with three backends: scripted rules for
//! tests, a co-occurrence oracle for deterministic network-free runs, and an
//! HTTP client for chat-completions-compatible services.

mod http;
mod oracle;
mod scripted;
pub mod stub;

pub use http::HttpModel;
pub use oracle::OracleModel;
pub use scripted::{Matcher, ScriptedModel};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable the HTTP backend reads its API key from. Keys never
/// come from config files or flags, so logged configs cannot leak them.
pub const API_KEY_ENV: &str = "NAV_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no scripted rule matched prompt starting with {prefix:?}")]
    Script { prefix: String },
    #[error("oracle cannot interpret prompt starting with {prefix:?}")]
    Oracle { prefix: String },
    #[error("api error (request {request_id}, status {status}): {message}")]
    Api { request_id: String, status: u16, message: String },
    #[error("transport error (request {request_id}): {message}")]
    Transport { request_id: String, message: String },
    #[error("model configuration: {0}")]
    Config(String),
}

/// Decoding parameters for one completion call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams { temperature: 0.0, max_tokens: 512, stop: None }
    }
}

/// A text-completion model. Implementations must be safe for concurrent
/// `complete` calls.
pub trait CompletionModel: Send + Sync {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, LlmError>;

    /// Whether identical prompts always produce identical responses.
    fn is_deterministic(&self) -> bool;

    fn backend_name(&self) -> &str;
}

/// Records every request/response pair flowing through an inner model, so a
/// caller can append them to a transcript.
pub struct RecordingModel<'a> {
    inner: &'a dyn CompletionModel,
    calls: std::sync::Mutex<Vec<(String, String)>>,
}

impl<'a> RecordingModel<'a> {
    pub fn new(inner: &'a dyn CompletionModel) -> Self {
        RecordingModel { inner, calls: std::sync::Mutex::new(Vec::new()) }
    }

    /// Drain the recorded (prompt, response) pairs in call order.
    pub fn drain(&self) -> Vec<(String, String)> {
        std::mem::take(&mut *self.calls.lock().expect("recording lock"))
    }
}

impl CompletionModel for RecordingModel<'_> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, LlmError> {
        let result = self.inner.complete(prompt, params);
        let logged = match &result {
            Ok(text) => text.clone(),
            Err(e) => format!("<error: {}>", e),
        };
        self.calls
            .lock()
            .expect("recording lock")
            .push((prompt.to_string(), logged));
        result
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn backend_name(&self) -> &str {
        self.inner.backend_name()
    }
}

/// Co-occurrence scores between goal categories and context terms (objects
/// or room types). A deterministic stand-in for model world knowledge; the
/// shipped table is an authored fixture, not a claim about the world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffinityTable {
    pub default_score: f64,
    /// goal category -> context term -> score in [0, 1].
    pub affinities: BTreeMap<String, BTreeMap<String, f64>>,
}

impl AffinityTable {
    pub fn score(&self, goal: &str, term: &str) -> f64 {
        let goal = goal.to_lowercase();
        let term = term.to_lowercase();
        self.affinities
            .get(&goal)
            .and_then(|m| m.get(&term))
            .copied()
            .unwrap_or(self.default_score)
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// The affinity table shipped with the repository.
    pub fn shipped() -> Self {
        Self::from_json_str(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/affinity.json"
        )))
        .expect("shipped affinity table parses")
    }

    pub fn from_pairs(default_score: f64, pairs: &[(&str, &str, f64)]) -> Self {
        let mut affinities: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (goal, term, score) in pairs {
            affinities
                .entry(goal.to_string())
                .or_default()
                .insert(term.to_string(), *score);
        }
        AffinityTable { default_score, affinities }
    }
}

/// Which backend a run should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Oracle,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(BackendKind::Scripted),
            "oracle" => Ok(BackendKind::Oracle),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend '{}'", other)),
        }
    }
}

/// Model section of a run configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub affinity_table_path: Option<String>,
    #[serde(default)]
    pub script_path: Option<String>,
}

fn default_backend() -> BackendKind {
    BackendKind::Oracle
}

fn default_model_name() -> String {
    "gpt-3.5-turbo".to_string()
}

fn default_max_tokens() -> u32 {
    512
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backend: BackendKind::Oracle,
            endpoint: None,
            model_name: default_model_name(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            affinity_table_path: None,
            script_path: None,
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> CompletionParams {
        CompletionParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            stop: None,
        }
    }

    /// Instantiate the configured backend.
    pub fn build(&self) -> Result<Box<dyn CompletionModel>, LlmError> {
        match self.backend {
            BackendKind::Oracle => {
                let table = match &self.affinity_table_path {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| {
                            LlmError::Config(format!("affinity table {}: {}", path, e))
                        })?;
                        AffinityTable::from_json_str(&text).map_err(|e| {
                            LlmError::Config(format!("affinity table {}: {}", path, e))
                        })?
                    }
                    None => AffinityTable::shipped(),
                };
                Ok(Box::new(OracleModel::new(table)))
            }
            BackendKind::Scripted => {
                let path = self.script_path.as_ref().ok_or_else(|| {
                    LlmError::Config("scripted backend requires script_path".into())
                })?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| LlmError::Config(format!("script {}: {}", path, e)))?;
                let model = ScriptedModel::from_json_str(&text)
                    .map_err(|e| LlmError::Config(format!("script {}: {}", path, e)))?;
                Ok(Box::new(model))
            }
            BackendKind::Http => {
                let endpoint = self.endpoint.as_ref().ok_or_else(|| {
                    LlmError::Config("http backend requires an endpoint".into())
                })?;
                Ok(Box::new(HttpModel::new(endpoint.clone(), self.model_name.clone())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affinity_lookup_uses_default_for_missing_pairs() {
        let t = AffinityTable::from_pairs(0.1, &[("laptop", "desk", 0.9)]);
        assert_eq!(t.score("laptop", "desk"), 0.9);
        assert_eq!(t.score("laptop", "toilet"), 0.1);
        assert_eq!(t.score("Laptop", "DESK"), 0.9);
    }

    #[test]
    fn shipped_table_parses_and_covers_goals() {
        let t = AffinityTable::shipped();
        assert!(t.score("laptop", "desk") > t.score("laptop", "toilet"));
        assert!(t.score("alarm clock", "bedroom") > 0.0);
    }

    #[test]
    fn recording_model_captures_pairs() {
        let inner = ScriptedModel::with_default("yes");
        let rec = RecordingModel::new(&inner);
        let out = rec.complete("hello", &CompletionParams::default()).unwrap();
        assert_eq!(out, "yes");
        let calls = rec.drain();
        assert_eq!(calls, vec![("hello".to_string(), "yes".to_string())]);
        assert!(rec.drain().is_empty());
    }
}
